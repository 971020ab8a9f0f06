/** localStorage-backed draft persistence so reloads keep in-progress work. */

import type { Draft, DraftStore } from "./flow.js";

const PREFIX = "stb-draft:";
const TOKEN_KEY = "stb-worker-token";

export class LocalDraftStore implements DraftStore {
  constructor(private readonly storage: Storage) {}

  load(itemId: string): Draft | null {
    const raw = this.storage.getItem(PREFIX + itemId);
    if (raw === null) return null;
    try {
      return JSON.parse(raw) as Draft;
    } catch {
      this.storage.removeItem(PREFIX + itemId);
      return null;
    }
  }

  save(draft: Draft): void {
    this.storage.setItem(PREFIX + draft.itemId, JSON.stringify(draft));
  }

  clear(itemId: string): void {
    this.storage.removeItem(PREFIX + itemId);
  }
}

export function loadWorkerToken(storage: Storage): string | null {
  return storage.getItem(TOKEN_KEY);
}

export function saveWorkerToken(storage: Storage, token: string): void {
  storage.setItem(TOKEN_KEY, token);
}
