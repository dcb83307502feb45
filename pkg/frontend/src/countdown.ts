// Countdown-to-expiry helpers for the permit table.

export const DEFAULT_EXPIRY_LEAD_SECONDS = 30 * 60;

export function countdownSeconds(validTo: string, now: Date): number {
  return Math.floor((Date.parse(validTo) - now.getTime()) / 1000);
}

/** Highlight rows that will expire within the lead window. */
export function isExpiringSoon(
  validTo: string,
  now: Date,
  leadSeconds: number = DEFAULT_EXPIRY_LEAD_SECONDS,
): boolean {
  const remaining = countdownSeconds(validTo, now);
  return remaining > 0 && remaining < leadSeconds;
}

export function formatCountdown(seconds: number): string {
  if (seconds <= 0) return "expired";
  const h = Math.floor(seconds / 3600);
  const m = Math.floor((seconds % 3600) / 60);
  const s = seconds % 60;
  if (h > 0) return `${h}h ${m}m`;
  if (m > 0) return `${m}m ${s}s`;
  return `${s}s`;
}
