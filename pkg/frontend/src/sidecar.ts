/**
 * Binary embedding sidecar format (bit-exact, little-endian):
 *
 *   8 bytes  magic "EMBSIDE1"
 *   u32      dim
 *   u64      count
 *   count *  (u64 id, dim * f32 values), ids strictly ascending
 */
import { readFileSync, writeFileSync } from 'fs';

export const SIDECAR_MAGIC = 'EMBSIDE1';
export const UNIT_NORM_TOL = 1e-5;
const HEADER_SIZE = 20;

export class SidecarError extends Error {}
export class BadMagic extends SidecarError {}
export class TruncatedFile extends SidecarError {}
export class NormViolation extends SidecarError {}

export interface SidecarEntry {
  id: bigint;
  values: Float32Array;
}

export function vectorNorm(values: Float32Array): number {
  let sum = 0;
  for (let i = 0; i < values.length; i++) {
    sum += values[i] * values[i];
  }
  return Math.sqrt(sum);
}

export function writeSidecar(path: string, dim: number, entries: SidecarEntry[]): void {
  if (dim < 1) {
    throw new SidecarError(`dim must be positive, got ${dim}`);
  }
  const sorted = [...entries].sort((a, b) => (a.id < b.id ? -1 : a.id > b.id ? 1 : 0));
  for (let i = 1; i < sorted.length; i++) {
    if (sorted[i].id === sorted[i - 1].id) {
      throw new SidecarError(`duplicate id ${sorted[i].id}`);
    }
  }
  const rowSize = 8 + 4 * dim;
  const buffer = Buffer.alloc(HEADER_SIZE + rowSize * sorted.length);
  buffer.write(SIDECAR_MAGIC, 0, 'ascii');
  buffer.writeUInt32LE(dim, 8);
  buffer.writeBigUInt64LE(BigInt(sorted.length), 12);
  let offset = HEADER_SIZE;
  for (const entry of sorted) {
    if (entry.values.length !== dim) {
      throw new SidecarError(`vector ${entry.id} is not ${dim}-dimensional`);
    }
    const norm = vectorNorm(entry.values);
    if (Math.abs(norm - 1.0) > UNIT_NORM_TOL) {
      throw new NormViolation(`vector ${entry.id} has norm ${norm}`);
    }
    buffer.writeBigUInt64LE(entry.id, offset);
    offset += 8;
    for (let i = 0; i < dim; i++) {
      buffer.writeFloatLE(entry.values[i], offset);
      offset += 4;
    }
  }
  writeFileSync(path, buffer);
}

export function readSidecar(path: string): { dim: number; entries: SidecarEntry[] } {
  const data = readFileSync(path);
  if (data.length < HEADER_SIZE) {
    throw new TruncatedFile(`${path}: shorter than the header`);
  }
  if (data.toString('ascii', 0, 8) !== SIDECAR_MAGIC) {
    throw new BadMagic(`${path}: bad magic`);
  }
  const dim = data.readUInt32LE(8);
  const count = Number(data.readBigUInt64LE(12));
  if (dim < 1) {
    throw new SidecarError(`${path}: invalid dim ${dim}`);
  }
  const rowSize = 8 + 4 * dim;
  const expected = HEADER_SIZE + rowSize * count;
  if (data.length < expected) {
    throw new TruncatedFile(`${path}: expected ${expected} bytes, got ${data.length}`);
  }
  if (data.length > expected) {
    throw new SidecarError(`${path}: ${data.length - expected} trailing bytes`);
  }
  const entries: SidecarEntry[] = [];
  let previous = -1n;
  let offset = HEADER_SIZE;
  for (let row = 0; row < count; row++) {
    const id = data.readBigUInt64LE(offset);
    if (id <= previous) {
      throw new SidecarError(`${path}: ids not strictly ascending at ${id}`);
    }
    previous = id;
    offset += 8;
    const values = new Float32Array(dim);
    for (let i = 0; i < dim; i++) {
      values[i] = data.readFloatLE(offset);
      offset += 4;
    }
    const norm = vectorNorm(values);
    if (Math.abs(norm - 1.0) > UNIT_NORM_TOL) {
      throw new NormViolation(`${path}: vector ${id} has norm ${norm}`);
    }
    entries.push({ id, values });
  }
  return { dim, entries };
}

export interface VerifyReport {
  ok: boolean;
  dim: number;
  count: number;
  violations: string[];
}

/** Tolerant check of an existing sidecar: collects violations instead of throwing. */
export function verifySidecar(path: string): VerifyReport {
  const violations: string[] = [];
  let data: Buffer;
  try {
    data = readFileSync(path);
  } catch (err) {
    return { ok: false, dim: 0, count: 0, violations: [`unreadable: ${err}`] };
  }
  if (data.length < HEADER_SIZE) {
    return { ok: false, dim: 0, count: 0, violations: ['shorter than the header'] };
  }
  if (data.toString('ascii', 0, 8) !== SIDECAR_MAGIC) {
    violations.push(`bad magic ${JSON.stringify(data.toString('ascii', 0, 8))}`);
    return { ok: false, dim: 0, count: 0, violations };
  }
  const dim = data.readUInt32LE(8);
  const count = Number(data.readBigUInt64LE(12));
  if (dim < 1) {
    violations.push(`invalid dim ${dim}`);
    return { ok: false, dim, count, violations };
  }
  const rowSize = 8 + 4 * dim;
  const expected = HEADER_SIZE + rowSize * count;
  if (data.length !== expected) {
    violations.push(`size mismatch: expected ${expected} bytes, found ${data.length}`);
    return { ok: false, dim, count, violations };
  }
  let previous = -1n;
  let offset = HEADER_SIZE;
  for (let row = 0; row < count; row++) {
    const id = data.readBigUInt64LE(offset);
    if (id <= previous) {
      violations.push(`ids not strictly ascending at row ${row} (${id})`);
    }
    previous = id;
    offset += 8;
    let sum = 0;
    for (let i = 0; i < dim; i++) {
      const v = data.readFloatLE(offset);
      sum += v * v;
      offset += 4;
    }
    const norm = Math.sqrt(sum);
    if (Math.abs(norm - 1.0) > UNIT_NORM_TOL) {
      violations.push(`vector ${id} has norm ${norm}`);
    }
  }
  return { ok: violations.length === 0, dim, count, violations };
}
