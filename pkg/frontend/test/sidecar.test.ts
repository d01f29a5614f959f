import assert from 'node:assert/strict';
import { mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { test } from 'node:test';

import {
  BadMagic,
  NormViolation,
  SidecarError,
  TruncatedFile,
  readSidecar,
  verifySidecar,
  writeSidecar,
} from '../src/sidecar';

function unit(values: number[]): Float32Array {
  const norm = Math.sqrt(values.reduce((acc, v) => acc + v * v, 0));
  return Float32Array.from(values, v => v / norm);
}

function tempDir(): string {
  return mkdtempSync(join(tmpdir(), 'sidecar-'));
}

test('round trip preserves ids and bytes', () => {
  const dir = tempDir();
  const path = join(dir, 'v.emb');
  const entries = [
    { id: 9n, values: unit([1, 2, 3, 4]) },
    { id: 2n, values: unit([-1, 0.5, 2, -3]) },
    { id: 2n ** 40n, values: unit([4, 3, 2, 1]) },
  ];
  writeSidecar(path, 4, entries);
  const loaded = readSidecar(path);
  assert.equal(loaded.dim, 4);
  assert.deepEqual(
    loaded.entries.map(e => e.id),
    [2n, 9n, 2n ** 40n]
  );
  const byId = new Map(entries.map(e => [e.id, e.values]));
  for (const entry of loaded.entries) {
    assert.deepEqual(Array.from(entry.values), Array.from(byId.get(entry.id)!));
  }
});

test('writes are byte-stable', () => {
  const dir = tempDir();
  const entries = [{ id: 1n, values: unit([1, 1]) }, { id: 5n, values: unit([2, -1]) }];
  writeSidecar(join(dir, 'a.emb'), 2, entries);
  writeSidecar(join(dir, 'b.emb'), 2, entries);
  assert.deepEqual(readFileSync(join(dir, 'a.emb')), readFileSync(join(dir, 'b.emb')));
});

test('rejects duplicate ids', () => {
  const dir = tempDir();
  assert.throws(
    () => writeSidecar(join(dir, 'v.emb'), 2, [
      { id: 1n, values: unit([1, 0]) },
      { id: 1n, values: unit([0, 1]) },
    ]),
    SidecarError
  );
});

test('rejects non-unit vectors on write', () => {
  const dir = tempDir();
  assert.throws(
    () => writeSidecar(join(dir, 'v.emb'), 2, [{ id: 1n, values: Float32Array.from([2, 0]) }]),
    NormViolation
  );
});

test('read detects bad magic', () => {
  const dir = tempDir();
  const path = join(dir, 'v.emb');
  writeFileSync(path, Buffer.concat([Buffer.from('NOTMAGIC'), Buffer.alloc(12)]));
  assert.throws(() => readSidecar(path), BadMagic);
});

test('read detects truncation', () => {
  const dir = tempDir();
  const path = join(dir, 'v.emb');
  writeSidecar(path, 2, [{ id: 1n, values: unit([1, 1]) }]);
  const data = readFileSync(path);
  writeFileSync(path, data.subarray(0, data.length - 3));
  assert.throws(() => readSidecar(path), TruncatedFile);
});

test('read detects trailing bytes', () => {
  const dir = tempDir();
  const path = join(dir, 'v.emb');
  writeSidecar(path, 2, [{ id: 1n, values: unit([1, 1]) }]);
  writeFileSync(path, Buffer.concat([readFileSync(path), Buffer.from('xx')]));
  assert.throws(() => readSidecar(path), SidecarError);
});

test('read detects norm violations with the offending id', () => {
  const dir = tempDir();
  const path = join(dir, 'v.emb');
  const buffer = Buffer.alloc(20 + 8 + 8);
  buffer.write('EMBSIDE1', 0, 'ascii');
  buffer.writeUInt32LE(2, 8);
  buffer.writeBigUInt64LE(1n, 12);
  buffer.writeBigUInt64LE(77n, 20);
  buffer.writeFloatLE(2.0, 28);
  buffer.writeFloatLE(0.0, 32);
  writeFileSync(path, buffer);
  assert.throws(() => readSidecar(path), /77/);
});

test('verify reports instead of throwing', () => {
  const dir = tempDir();
  const good = join(dir, 'good.emb');
  writeSidecar(good, 2, [{ id: 1n, values: unit([3, 4]) }]);
  assert.equal(verifySidecar(good).ok, true);

  const bad = join(dir, 'bad.emb');
  const buffer = readFileSync(good);
  buffer.writeFloatLE(9.0, 28); // corrupt one component
  writeFileSync(bad, buffer);
  const report = verifySidecar(bad);
  assert.equal(report.ok, false);
  assert.match(report.violations.join(';'), /norm/);

  const magic = join(dir, 'magic.emb');
  writeFileSync(magic, Buffer.concat([Buffer.from('WRONG!!!'), Buffer.alloc(12)]));
  assert.equal(verifySidecar(magic).ok, false);
});
