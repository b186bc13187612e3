import type { Hit } from "./api";

/**
 * Fraction of the first `k` ids the two result lists share. This is the one
 * piece of client-side arithmetic the console performs; every score shown in
 * the UI comes straight from the API.
 */
export function topOverlap(a: Hit[], b: Hit[], k = 10): number {
  const ids = new Set(a.slice(0, k).map((h) => h.id));
  let shared = 0;
  for (const hit of b.slice(0, k)) {
    if (ids.has(hit.id)) shared += 1;
  }
  return shared / k;
}
