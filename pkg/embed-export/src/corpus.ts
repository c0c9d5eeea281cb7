import * as fs from "fs";
import Papa from "papaparse";

/**
 * Raw corpus readers. Two layouts are accepted:
 *  - JSONL: one user per line,
 *    {"user_id": "...", "label": 0|1, "tweets": [{"ts": "...", "text": "..."}]}
 *  - CSV with a header row user_id,label,ts,text, one tweet per row;
 *    consecutive rows of one user are grouped in file order.
 * Rows that fail to parse are skipped and reported, never fatal.
 */

export interface RawTweet {
  ts: string;
  text: string;
}

export interface RawUser {
  userId: string;
  label: number;
  tweets: RawTweet[];
}

export interface CorpusIssue {
  line: number;
  reason: string;
}

export interface Corpus {
  users: RawUser[];
  skipped: CorpusIssue[];
}

function validTimestamp(ts: string): boolean {
  return !Number.isNaN(Date.parse(ts));
}

function validLabel(value: unknown): value is number {
  return value === 0 || value === 1;
}

export function readCorpus(path: string): Corpus {
  if (!fs.existsSync(path)) {
    throw new Error(`corpus file not found: ${path}`);
  }
  const text = fs.readFileSync(path, "utf-8");
  if (path.endsWith(".csv")) {
    return parseCsv(text);
  }
  return parseJsonl(text);
}

function parseJsonl(text: string): Corpus {
  const users: RawUser[] = [];
  const skipped: CorpusIssue[] = [];
  const seen = new Set<string>();
  text.split("\n").forEach((line, index) => {
    const lineNo = index + 1;
    const trimmed = line.trim();
    if (!trimmed) return;
    let obj: any;
    try {
      obj = JSON.parse(trimmed);
    } catch {
      skipped.push({ line: lineNo, reason: "invalid JSON" });
      return;
    }
    if (typeof obj.user_id !== "string" || !validLabel(obj.label)
        || !Array.isArray(obj.tweets)) {
      skipped.push({ line: lineNo, reason: "missing user_id/label/tweets" });
      return;
    }
    if (seen.has(obj.user_id)) {
      skipped.push({ line: lineNo, reason: `duplicate user_id ${obj.user_id}` });
      return;
    }
    const tweets: RawTweet[] = [];
    for (const tweet of obj.tweets) {
      if (typeof tweet?.ts !== "string" || typeof tweet?.text !== "string"
          || !validTimestamp(tweet.ts)) {
        skipped.push({ line: lineNo, reason: "malformed tweet entry" });
        continue;
      }
      tweets.push({ ts: tweet.ts, text: tweet.text });
    }
    if (tweets.length === 0) {
      skipped.push({ line: lineNo, reason: `user ${obj.user_id} has no usable tweets` });
      return;
    }
    seen.add(obj.user_id);
    users.push({ userId: obj.user_id, label: obj.label, tweets });
  });
  return { users, skipped };
}

function parseCsv(text: string): Corpus {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  const users: RawUser[] = [];
  const skipped: CorpusIssue[] = [];
  const byId = new Map<string, RawUser>();
  parsed.data.forEach((row, index) => {
    const lineNo = index + 2; // header occupies line 1
    const userId = row.user_id;
    const label = Number(row.label);
    if (!userId || !validLabel(label) || !row.ts || row.text === undefined
        || !validTimestamp(row.ts)) {
      skipped.push({ line: lineNo, reason: "malformed CSV row" });
      return;
    }
    let user = byId.get(userId);
    if (!user) {
      user = { userId, label, tweets: [] };
      byId.set(userId, user);
      users.push(user);
    }
    user.tweets.push({ ts: row.ts, text: row.text });
  });
  return { users, skipped };
}
