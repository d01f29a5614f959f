/**
 * embed-adapter CLI:
 *
 *   embed-texts  --input rows.tsv --model hash:dim=64,seed=1 --out vectors.emb
 *   embed-images --input rows.tsv --model hash-image:dim=64 --out vectors.emb
 *   verify       --path vectors.emb
 *
 * Exit codes: 0 ok, 1 usage/validation error, 2 verification failure.
 */
import { embedImages, embedTexts } from './embed';
import { verifySidecar } from './sidecar';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith('--') || argv[i + 1] === undefined) {
      throw new Error(`bad flag pair near ${argv[i]}`);
    }
    flags.set(argv[i].slice(2), argv[i + 1]);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (!value) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

async function main(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  try {
    if (command === 'embed-texts' || command === 'embed-images') {
      const flags = parseFlags(rest);
      const input = required(flags, 'input');
      const model = required(flags, 'model');
      const out = required(flags, 'out');
      const result =
        command === 'embed-texts'
          ? embedTexts(input, model, out)
          : await embedImages(input, model, out);
      for (const skip of result.skipped) {
        console.error(`skipped ${skip.id}: ${skip.reason}`);
      }
      console.log(`written=${result.written} skipped=${result.skipped.length} out=${result.outPath}`);
      return 0;
    }
    if (command === 'verify') {
      const flags = parseFlags(rest);
      const report = verifySidecar(required(flags, 'path'));
      console.log(`dim=${report.dim} count=${report.count}`);
      for (const violation of report.violations) {
        console.error(`violation: ${violation}`);
      }
      console.log(report.ok ? 'ok' : 'FAILED');
      return report.ok ? 0 : 2;
    }
    console.error('usage: embed-adapter <embed-texts|embed-images|verify> [flags]');
    return 1;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (require.main === module) {
  main(process.argv.slice(2)).then(code => {
    process.exitCode = code;
  });
}

export { main };
