"""Dataset generator, workload replayer and metrics reporter."""
