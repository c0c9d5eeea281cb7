import * as fs from "fs";
import { Corpus, readCorpus } from "./corpus";
import { Embedder, loadEmbedder, meanPool, tokenize } from "./embedder";

export const EMB_FORMAT = "narrationdep-emb/1";

/** Matches the consumer's default per-tweet token cap. */
export const Q_MAX_DEFAULT = 64;

export type Mode = "token" | "sentence";

export interface ExportOptions {
  input: string;
  model: string;
  mode: Mode;
  out: string;
  qMax?: number;
}

export interface ExportStats {
  users: number;
  tweets: number;
  skippedRows: number;
  skippedTweets: number;
  truncatedTweets: number;
  dim: number;
}

/**
 * Convert a raw corpus into an embedding file.
 *
 * Token mode emits one vector per word token (capped at qMax with a
 * truncation count); sentence mode mean-pools a tweet's token vectors and
 * stores the result as a single-token tweet. Tweets whose text has no
 * tokens are dropped, and users left with no tweets are dropped, both
 * reported in the stats and on stderr.
 */
export function exportCorpus(opts: ExportOptions,
                             log: (msg: string) => void = console.error): ExportStats {
  const embedder = loadEmbedder(opts.model);
  const qMax = opts.qMax ?? Q_MAX_DEFAULT;
  const corpus = readCorpus(opts.input);
  for (const issue of corpus.skipped) {
    log(`skip line ${issue.line}: ${issue.reason}`);
  }
  const stats: ExportStats = {
    users: 0,
    tweets: 0,
    skippedRows: corpus.skipped.length,
    skippedTweets: 0,
    truncatedTweets: 0,
    dim: embedder.dim,
  };
  const lines: string[] = [JSON.stringify({ format: EMB_FORMAT, d_w: embedder.dim })];
  for (const user of corpus.users) {
    const tweets = [];
    for (const tweet of user.tweets) {
      const encoded = encodeTweet(tweet.text, embedder, opts.mode, qMax, stats);
      if (encoded === null) {
        stats.skippedTweets += 1;
        log(`skip tweet of ${user.userId}: no tokens after tokenization`);
        continue;
      }
      tweets.push({ ts: tweet.ts, tokens: encoded, text: tweet.text });
    }
    if (tweets.length === 0) {
      log(`skip user ${user.userId}: no usable tweets`);
      continue;
    }
    stats.users += 1;
    stats.tweets += tweets.length;
    lines.push(JSON.stringify({ user_id: user.userId, label: user.label, tweets }));
  }
  fs.writeFileSync(opts.out, lines.join("\n") + "\n", "utf-8");
  return stats;
}

function encodeTweet(text: string, embedder: Embedder, mode: Mode, qMax: number,
                     stats: ExportStats): number[][] | null {
  const tokens = tokenize(text);
  if (tokens.length === 0) return null;
  const vectors = tokens.map((t) => embedder.embedToken(t));
  if (mode === "sentence") {
    return [meanPool(vectors)];
  }
  if (vectors.length > qMax) {
    stats.truncatedTweets += 1;
    return vectors.slice(0, qMax);
  }
  return vectors;
}
