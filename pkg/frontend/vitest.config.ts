import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 120_000,
    // test files spawn their own service instances; keep them sequential
    // so ports and datasets never interleave
    fileParallelism: false,
  },
});
