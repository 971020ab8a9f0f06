/**
 * Two-step annotation state machine.
 *
 * Step 1: judge each speaker as human / undecided / bot.
 * Step 2 (reachable only once step 1 is complete): pick the preferred speaker
 * for each feature. Submission is possible only when both steps are done.
 */

import type {
  AnnotationPayload,
  BatchItem,
  FeatureName,
  WireChoice,
  WireLabel,
} from "./types.js";
import { FEATURES } from "./types.js";

export type EntityChoice = "human" | "undecided" | "bot";
export type FeatureChoice = "speaker_a" | "tie" | "speaker_b";

export interface Draft {
  itemId: string;
  entities: [EntityChoice | null, EntityChoice | null];
  features: Record<FeatureName, FeatureChoice | null>;
  startedAt: number;
}

export class StepOrderError extends Error {}

export function emptyDraft(itemId: string, now: number): Draft {
  return {
    itemId,
    entities: [null, null],
    features: { fluency: null, specificity: null, sensibleness: null },
    startedAt: now,
  };
}

export function step1Complete(draft: Draft): boolean {
  return draft.entities[0] !== null && draft.entities[1] !== null;
}

/** Step 2 opens exactly when both entity judgments exist. */
export function canOpenFeatures(draft: Draft): boolean {
  return step1Complete(draft);
}

export function isComplete(draft: Draft): boolean {
  return step1Complete(draft) && FEATURES.every((f) => draft.features[f] !== null);
}

export function setEntity(draft: Draft, slot: 0 | 1, choice: EntityChoice): Draft {
  const entities: Draft["entities"] = [...draft.entities];
  entities[slot] = choice;
  return { ...draft, entities };
}

export function setFeature(draft: Draft, feature: FeatureName, choice: FeatureChoice): Draft {
  if (!canOpenFeatures(draft)) {
    throw new StepOrderError("feature preferences are locked until both speakers are judged");
  }
  return { ...draft, features: { ...draft.features, [feature]: choice } };
}

const LABEL_WIRE: Record<EntityChoice, WireLabel> = {
  human: "human",
  undecided: "unsure",
  bot: "bot",
};

const CHOICE_WIRE: Record<FeatureChoice, WireChoice> = {
  speaker_a: "first",
  tie: "tie",
  speaker_b: "second",
};

/** Client-side mirror of the server's structural validation. */
export function buildPayload(draft: Draft, now: number): AnnotationPayload {
  if (!isComplete(draft)) {
    throw new StepOrderError("draft is incomplete");
  }
  const [e0, e1] = draft.entities;
  const preferences = {} as Record<FeatureName, WireChoice>;
  for (const f of FEATURES) {
    preferences[f] = CHOICE_WIRE[draft.features[f] as FeatureChoice];
  }
  return {
    item_id: draft.itemId,
    labels: [LABEL_WIRE[e0 as EntityChoice], LABEL_WIRE[e1 as EntityChoice]],
    preferences,
    duration_seconds: Math.max(0, (now - draft.startedAt) / 1000),
  };
}

/** Persistence boundary so drafts survive page reloads. */
export interface DraftStore {
  load(itemId: string): Draft | null;
  save(draft: Draft): void;
  clear(itemId: string): void;
}

export class MemoryDraftStore implements DraftStore {
  private drafts = new Map<string, Draft>();

  load(itemId: string): Draft | null {
    return this.drafts.get(itemId) ?? null;
  }

  save(draft: Draft): void {
    this.drafts.set(draft.itemId, draft);
  }

  clear(itemId: string): void {
    this.drafts.delete(itemId);
  }
}

/** One claimed batch being worked through item by item. */
export class AnnotationSession {
  private index = 0;
  private currentDraft: Draft | null = null;

  constructor(
    private readonly items: BatchItem[],
    private readonly store: DraftStore,
    private readonly clock: () => number = () => Date.now(),
  ) {}

  done(): boolean {
    return this.index >= this.items.length;
  }

  position(): { done: number; total: number } {
    return { done: this.index, total: this.items.length };
  }

  current(): BatchItem | null {
    return this.done() ? null : this.items[this.index] ?? null;
  }

  /** Never expose more than the item's k exchanges, whatever the payload holds. */
  visibleExchanges(item: BatchItem): [string, string][] {
    return item.exchanges.slice(0, item.k);
  }

  draft(): Draft {
    const item = this.current();
    if (item === null) {
      throw new StepOrderError("session is finished");
    }
    if (this.currentDraft === null || this.currentDraft.itemId !== item.item_id) {
      this.currentDraft = this.store.load(item.item_id) ?? emptyDraft(item.item_id, this.clock());
    }
    return this.currentDraft;
  }

  chooseEntity(slot: 0 | 1, choice: EntityChoice): Draft {
    this.currentDraft = setEntity(this.draft(), slot, choice);
    this.store.save(this.currentDraft);
    return this.currentDraft;
  }

  chooseFeature(feature: FeatureName, choice: FeatureChoice): Draft {
    this.currentDraft = setFeature(this.draft(), feature, choice);
    this.store.save(this.currentDraft);
    return this.currentDraft;
  }

  buildPayload(): AnnotationPayload {
    return buildPayload(this.draft(), this.clock());
  }

  /** Move on after an acknowledged (or duplicate-rejected) submission. */
  advance(): void {
    const item = this.current();
    if (item !== null) {
      this.store.clear(item.item_id);
    }
    this.currentDraft = null;
    this.index += 1;
  }
}
