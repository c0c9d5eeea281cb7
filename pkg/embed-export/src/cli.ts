#!/usr/bin/env node
import { ModelLoadError } from "./embedder";
import { ExportOptions, exportCorpus } from "./exporter";

const USAGE = `usage: narrationdep-export export --in <corpus.(jsonl|csv)> --model <name> \
--mode token|sentence --out <emb.jsonl> [--q-max N]

Built-in models: hash-<dim> (deterministic seeded-hash projection), e.g. hash-64.`;

function parseArgs(argv: string[]): ExportOptions {
  if (argv[0] !== "export") {
    throw new UsageError(`expected the "export" subcommand\n${USAGE}`);
  }
  const flags = new Map<string, string>();
  for (let i = 1; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new UsageError(`malformed flag near ${key}\n${USAGE}`);
    }
    flags.set(key.slice(2), value);
  }
  const input = flags.get("in");
  const model = flags.get("model");
  const mode = flags.get("mode");
  const out = flags.get("out");
  if (!input || !model || !mode || !out) {
    throw new UsageError(`--in, --model, --mode and --out are required\n${USAGE}`);
  }
  if (mode !== "token" && mode !== "sentence") {
    throw new UsageError(`--mode must be token or sentence, got ${mode}`);
  }
  const opts: ExportOptions = { input, model, mode, out };
  const qMax = flags.get("q-max");
  if (qMax !== undefined) {
    opts.qMax = parseInt(qMax, 10);
    if (!Number.isFinite(opts.qMax) || opts.qMax < 1) {
      throw new UsageError(`--q-max must be a positive integer, got ${qMax}`);
    }
  }
  return opts;
}

class UsageError extends Error {}

export function main(argv: string[]): number {
  try {
    const opts = parseArgs(argv);
    const stats = exportCorpus(opts);
    console.log(JSON.stringify(stats));
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(err.message);
      return 1;
    }
    if (err instanceof ModelLoadError) {
      console.error(`model load failure: ${(err as Error).message}`);
      return 3;
    }
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
