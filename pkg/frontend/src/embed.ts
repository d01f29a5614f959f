/**
 * Batch embedding: read a tab-separated (id, text-or-uri) file, encode each
 * row, and write a sidecar plus a companion text manifest for audit. Rows
 * that cannot be encoded are skipped and logged, never fatal.
 */
import { readFileSync } from 'fs';
import { resolveImageEncoder, resolveTextEncoder } from './encoders';
import { SidecarEntry, writeSidecar } from './sidecar';
import { writeFileSync } from 'fs';

export interface SkippedRow {
  id: string;
  reason: string;
}

export interface BatchResult {
  written: number;
  skipped: SkippedRow[];
  outPath: string;
  manifestPath: string;
}

interface InputRow {
  id: bigint;
  value: string;
}

function parseInput(inputPath: string, skipped: SkippedRow[]): InputRow[] {
  const rows: InputRow[] = [];
  const seen = new Set<bigint>();
  const lines = readFileSync(inputPath, 'utf-8').split('\n');
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].replace(/\r$/, '');
    if (!line) continue;
    const fields = line.split('\t');
    if (fields.length < 2) {
      skipped.push({ id: `line ${i + 1}`, reason: 'expected at least 2 tab-separated fields' });
      continue;
    }
    let id: bigint;
    try {
      id = BigInt(fields[0]);
    } catch {
      skipped.push({ id: fields[0], reason: 'id is not decimal' });
      continue;
    }
    if (id < 0n || id >= 1n << 64n) {
      skipped.push({ id: fields[0], reason: 'id out of 64-bit range' });
      continue;
    }
    if (seen.has(id)) {
      skipped.push({ id: fields[0], reason: 'duplicate id' });
      continue;
    }
    seen.add(id);
    rows.push({ id, value: fields[1] });
  }
  return rows;
}

function writeOutputs(
  outPath: string,
  dim: number,
  entries: SidecarEntry[],
  texts: Map<bigint, string>,
  sourceTag: string
): string {
  writeSidecar(outPath, dim, entries);
  const manifestPath = `${outPath}.manifest.tsv`;
  const lines = [`# source_tag: ${sourceTag}`];
  for (const entry of [...entries].sort((a, b) => (a.id < b.id ? -1 : 1))) {
    lines.push(`${entry.id}\t${texts.get(entry.id) ?? ''}`);
  }
  writeFileSync(manifestPath, lines.join('\n') + '\n', 'utf-8');
  return manifestPath;
}

export function embedTexts(inputPath: string, modelTag: string, outPath: string): BatchResult {
  const encoder = resolveTextEncoder(modelTag);
  const skipped: SkippedRow[] = [];
  const entries: SidecarEntry[] = [];
  const texts = new Map<bigint, string>();
  for (const row of parseInput(inputPath, skipped)) {
    if (!row.value.trim()) {
      skipped.push({ id: row.id.toString(), reason: 'EncodingFailure: empty text' });
      continue;
    }
    entries.push({ id: row.id, values: encoder.encode(row.value) });
    texts.set(row.id, row.value);
  }
  const manifestPath = writeOutputs(outPath, encoder.dim, entries, texts, encoder.tag);
  return { written: entries.length, skipped, outPath, manifestPath };
}

async function loadImage(uri: string): Promise<Buffer> {
  if (uri.startsWith('http://') || uri.startsWith('https://')) {
    const response = await fetch(uri);
    if (!response.ok) {
      throw new Error(`http ${response.status}`);
    }
    return Buffer.from(await response.arrayBuffer());
  }
  return readFileSync(uri);
}

export async function embedImages(
  inputPath: string,
  modelTag: string,
  outPath: string
): Promise<BatchResult> {
  const encoder = resolveImageEncoder(modelTag);
  const skipped: SkippedRow[] = [];
  const entries: SidecarEntry[] = [];
  const uris = new Map<bigint, string>();
  for (const row of parseInput(inputPath, skipped)) {
    let data: Buffer;
    try {
      data = await loadImage(row.value);
    } catch (err) {
      skipped.push({ id: row.id.toString(), reason: `FetchFailure: ${err}` });
      continue;
    }
    entries.push({ id: row.id, values: encoder.encodeBytes(data) });
    uris.set(row.id, row.value);
  }
  const manifestPath = writeOutputs(outPath, encoder.dim, entries, uris, encoder.tag);
  return { written: entries.length, skipped, outPath, manifestPath };
}

export { verifySidecar as verify } from './sidecar';
