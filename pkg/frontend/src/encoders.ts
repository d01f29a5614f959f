/**
 * Encoder registry. A model tag resolves to a concrete encoder:
 *
 *   hash:dim=64,seed=1        deterministic token-hash text encoder
 *   hash-image:dim=64         deterministic byte-hash image encoder
 *
 * The hash text encoder reproduces the core toolkit's mock provider bit for
 * bit (sha256 over seed||token, bucket + sign, normalize, float32), so desk
 * runs are reproducible across both implementations. Tags naming pretrained
 * checkpoints raise ModelLoadFailure when no model runtime is installed;
 * encoder choice is provenance, not core logic.
 */
import { createHash } from 'crypto';

export class ModelLoadFailure extends Error {}

export interface TextEncoderModel {
  tag: string;
  dim: number;
  encode(text: string): Float32Array;
}

export interface ImageEncoderModel {
  tag: string;
  dim: number;
  encodeBytes(data: Buffer): Float32Array;
}

export function normalizeText(text: string): string {
  let out = text.normalize('NFC').toLowerCase().normalize('NFC');
  return out.split(/\s+/u).filter(Boolean).join(' ');
}

export function tokenize(text: string): string[] {
  return text.match(/[\p{L}\p{N}]+/gu) ?? [];
}

function sha256(...parts: Buffer[]): Buffer {
  const hash = createHash('sha256');
  for (const part of parts) {
    hash.update(part);
  }
  return hash.digest();
}

function normalized(buckets: Float64Array): Float32Array {
  let sum = 0;
  for (let i = 0; i < buckets.length; i++) {
    sum += buckets[i] * buckets[i];
  }
  const norm = Math.sqrt(sum);
  const out = new Float32Array(buckets.length);
  for (let i = 0; i < buckets.length; i++) {
    out[i] = buckets[i] / norm;
  }
  return out;
}

class HashTextEncoder implements TextEncoderModel {
  readonly tag: string;
  readonly dim: number;
  private readonly seedBytes: Buffer;

  constructor(tag: string, dim: number, seed: bigint) {
    if (dim < 2) {
      throw new ModelLoadFailure(`hash encoder needs dim >= 2, got ${dim}`);
    }
    this.tag = tag;
    this.dim = dim;
    this.seedBytes = Buffer.alloc(8);
    this.seedBytes.writeBigUInt64LE(seed);
  }

  private accumulate(token: string, buckets: Float64Array): void {
    const digest = sha256(this.seedBytes, Buffer.from(token, 'utf-8'));
    const bucket = Number(digest.readBigUInt64LE(0) % BigInt(this.dim));
    buckets[bucket] += digest[8] % 2 === 0 ? 1 : -1;
  }

  encode(text: string): Float32Array {
    const tokens = tokenize(normalizeText(text));
    const buckets = new Float64Array(this.dim);
    for (const token of tokens) {
      this.accumulate(token, buckets);
    }
    if (tokens.length === 0 || buckets.every(v => v === 0)) {
      this.accumulate('', buckets);
    }
    return normalized(buckets);
  }
}

class HashImageEncoder implements ImageEncoderModel {
  readonly tag: string;
  readonly dim: number;

  constructor(tag: string, dim: number) {
    if (dim < 2) {
      throw new ModelLoadFailure(`hash-image encoder needs dim >= 2, got ${dim}`);
    }
    this.tag = tag;
    this.dim = dim;
  }

  encodeBytes(data: Buffer): Float32Array {
    const digest = sha256(data);
    const buckets = new Float64Array(this.dim);
    const index = Buffer.alloc(4);
    for (let i = 0; i < this.dim; i++) {
      index.writeUInt32LE(i);
      const h = sha256(digest, index);
      // top 53 bits -> exact f64 in [0, 1), mapped to [-1, 1)
      buckets[i] = (Number(h.readBigUInt64LE(0) >> 11n) / 2 ** 53) * 2 - 1;
    }
    return normalized(buckets);
  }
}

function parseHashParams(spec: string, tag: string): Map<string, string> {
  const params = new Map<string, string>();
  for (const part of spec.split(',')) {
    const [key, value] = part.split('=', 2);
    if (!key || value === undefined) {
      throw new ModelLoadFailure(`bad parameter ${JSON.stringify(part)} in tag ${tag}`);
    }
    params.set(key.trim(), value.trim());
  }
  return params;
}

export function resolveTextEncoder(modelTag: string): TextEncoderModel {
  const [family, spec] = modelTag.split(':', 2);
  if ((family === 'hash' || family === 'mock-hash') && spec) {
    const params = parseHashParams(spec, modelTag);
    const dim = Number(params.get('dim') ?? 'NaN');
    const seed = BigInt(params.get('seed') ?? '0');
    if (!Number.isInteger(dim)) {
      throw new ModelLoadFailure(`tag ${modelTag} needs an integer dim`);
    }
    return new HashTextEncoder(modelTag, dim, seed);
  }
  throw new ModelLoadFailure(
    `cannot load text encoder ${JSON.stringify(modelTag)}: no model runtime is` +
      ' installed in this build; use hash:dim=<D>,seed=<S>'
  );
}

export function resolveImageEncoder(modelTag: string): ImageEncoderModel {
  const [family, spec] = modelTag.split(':', 2);
  if (family === 'hash-image' && spec) {
    const params = parseHashParams(spec, modelTag);
    const dim = Number(params.get('dim') ?? 'NaN');
    if (!Number.isInteger(dim)) {
      throw new ModelLoadFailure(`tag ${modelTag} needs an integer dim`);
    }
    return new HashImageEncoder(modelTag, dim);
  }
  throw new ModelLoadFailure(
    `cannot load image encoder ${JSON.stringify(modelTag)}: no model runtime is` +
      ' installed in this build; use hash-image:dim=<D>'
  );
}
