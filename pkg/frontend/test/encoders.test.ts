import assert from 'node:assert/strict';
import { test } from 'node:test';

import {
  ModelLoadFailure,
  normalizeText,
  resolveImageEncoder,
  resolveTextEncoder,
  tokenize,
} from '../src/encoders';
import { UNIT_NORM_TOL, vectorNorm } from '../src/sidecar';

test('normalizeText lowercases, composes, and collapses whitespace', () => {
  assert.equal(normalizeText('  Red   SPORTS car '), 'red sports car');
  assert.equal(normalizeText('Café'), 'café');
});

test('tokenize splits on punctuation and underscores', () => {
  assert.deepEqual(tokenize('motor-car, parked_there 42'), ['motor', 'car', 'parked', 'there', '42']);
});

test('hash text encoder is deterministic and unit norm', () => {
  const encoder = resolveTextEncoder('hash:dim=64,seed=7');
  const a = encoder.encode('a red sports car');
  const b = encoder.encode('a red sports car');
  assert.deepEqual(Array.from(a), Array.from(b));
  assert.ok(Math.abs(vectorNorm(a) - 1.0) < UNIT_NORM_TOL);
});

test('hash text encoder differs across seeds', () => {
  const one = resolveTextEncoder('hash:dim=64,seed=1').encode('token soup');
  const two = resolveTextEncoder('hash:dim=64,seed=2').encode('token soup');
  assert.notDeepEqual(Array.from(one), Array.from(two));
});

test('empty text falls back to a deterministic unit vector', () => {
  const encoder = resolveTextEncoder('hash:dim=16,seed=5');
  const a = encoder.encode('');
  const b = encoder.encode('   ');
  assert.deepEqual(Array.from(a), Array.from(b));
  assert.ok(Math.abs(vectorNorm(a) - 1.0) < UNIT_NORM_TOL);
});

test('image encoder hashes bytes deterministically', () => {
  const encoder = resolveImageEncoder('hash-image:dim=32');
  const payload = Buffer.from('fake image bytes');
  const a = encoder.encodeBytes(payload);
  const b = encoder.encodeBytes(Buffer.from('fake image bytes'));
  assert.deepEqual(Array.from(a), Array.from(b));
  assert.ok(Math.abs(vectorNorm(a) - 1.0) < UNIT_NORM_TOL);
  const other = encoder.encodeBytes(Buffer.from('different bytes'));
  assert.notDeepEqual(Array.from(a), Array.from(other));
});

test('pretrained tags fail loudly without a model runtime', () => {
  assert.throws(() => resolveTextEncoder('sentence-encoder-v2'), ModelLoadFailure);
  assert.throws(() => resolveImageEncoder('vision-encoder-v2'), ModelLoadFailure);
  assert.throws(() => resolveTextEncoder('hash:dim=1,seed=0'), ModelLoadFailure);
  assert.throws(() => resolveTextEncoder('hash:dim=abc,seed=0'), ModelLoadFailure);
});
