/**
 * Stratified 50/50 train/test split over (modulation, snr) cells.
 *
 * Odd cells alternate which side receives the extra record, so the global
 * totals come out to ceil(N/2) and floor(N/2). Deterministic per seed.
 */

export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export interface SplitResult {
  train: number[];
  test: number[];
  oddCells: number;
}

export function splitHalf(cellOf: string[], seed: number): SplitResult {
  const cells = new Map<string, number[]>();
  cellOf.forEach((key, index) => {
    const members = cells.get(key);
    if (members) members.push(index);
    else cells.set(key, [index]);
  });
  const rng = mulberry32(seed);
  const train: number[] = [];
  const test: number[] = [];
  let oddCells = 0;
  let extraToTrain = true;
  for (const key of [...cells.keys()].sort()) {
    const members = [...cells.get(key)!];
    for (let i = members.length - 1; i > 0; i--) {
      const j = Math.floor(rng() * (i + 1));
      [members[i], members[j]] = [members[j], members[i]];
    }
    let take = Math.floor(members.length / 2);
    if (members.length % 2 === 1) {
      oddCells += 1;
      if (extraToTrain) take += 1;
      extraToTrain = !extraToTrain;
    }
    train.push(...members.slice(0, take));
    test.push(...members.slice(take));
  }
  train.sort((a, b) => a - b);
  test.sort((a, b) => a - b);
  return { train, test, oddCells };
}
