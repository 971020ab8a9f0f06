/**
 * HTML renderers for the annotation screens.
 *
 * Plain template strings, no framework: the page re-renders on every state
 * change and main.ts re-binds the handlers. Speakers appear only as A and B;
 * the payload never contains system identities and nothing here adds any.
 */

import type { Draft, EntityChoice, FeatureChoice } from "./flow.js";
import { canOpenFeatures, isComplete } from "./flow.js";
import type { BatchItem, FeatureName } from "./types.js";
import { FEATURES, FEATURE_HELP } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function renderExchanges(item: BatchItem, visible: [string, string][]): string {
  const rows = visible
    .map(
      ([a, b]) => `
  <div class="exchange">
    <div class="turn turn-a"><span class="speaker">Speaker A</span>${escapeHtml(a)}</div>
    <div class="turn turn-b"><span class="speaker">Speaker B</span>${escapeHtml(b)}</div>
  </div>`,
    )
    .join("\n");
  return `<section class="conversation" data-item="${escapeHtml(item.item_id)}">${rows}\n</section>`;
}

const ENTITY_OPTIONS: [EntityChoice, string][] = [
  ["human", "Human"],
  ["undecided", "Not sure"],
  ["bot", "Bot"],
];

export function renderEntityStep(draft: Draft): string {
  const groups = [0, 1]
    .map((slot) => {
      const selected = draft.entities[slot as 0 | 1];
      const buttons = ENTITY_OPTIONS.map(
        ([choice, label]) => `
      <button type="button" class="choice${selected === choice ? " selected" : ""}"
              data-entity-slot="${slot}" data-entity-choice="${choice}">${label}</button>`,
      ).join("");
      return `
    <fieldset class="entity" data-slot="${slot}">
      <legend>Is Speaker ${slot === 0 ? "A" : "B"} a human or a bot?</legend>${buttons}
    </fieldset>`;
    })
    .join("\n");
  return `<section class="step step-1"><h2>Step 1: judge each speaker</h2>${groups}</section>`;
}

const FEATURE_OPTIONS: [FeatureChoice, string][] = [
  ["speaker_a", "Speaker A"],
  ["tie", "Tie"],
  ["speaker_b", "Speaker B"],
];

export function renderFeatureStep(draft: Draft): string {
  if (!canOpenFeatures(draft)) {
    return `<section class="step step-2 locked">
  <h2>Step 2: compare the speakers</h2>
  <p class="hint">Judge both speakers first.</p>
</section>`;
  }
  const rows = FEATURES.map((feature: FeatureName) => {
    const selected = draft.features[feature];
    const buttons = FEATURE_OPTIONS.map(
      ([choice, label]) => `
      <button type="button" class="choice${selected === choice ? " selected" : ""}"
              data-feature="${feature}" data-feature-choice="${choice}">${label}</button>`,
    ).join("");
    return `
    <fieldset class="feature" data-feature="${feature}">
      <legend>${feature}<span class="tooltip" title="${escapeHtml(FEATURE_HELP[feature])}">?</span></legend>${buttons}
    </fieldset>`;
  }).join("\n");
  return `<section class="step step-2"><h2>Step 2: compare the speakers</h2>${rows}</section>`;
}

export function renderSubmit(draft: Draft): string {
  const enabled = isComplete(draft);
  return `<button type="button" id="submit" ${enabled ? "" : "disabled "}class="submit">Submit</button>`;
}

export function renderScreen(
  item: BatchItem,
  visible: [string, string][],
  draft: Draft,
  position: { done: number; total: number },
): string {
  return [
    `<header><span class="progress">${position.done + 1} / ${position.total}</span></header>`,
    renderExchanges(item, visible),
    renderEntityStep(draft),
    renderFeatureStep(draft),
    renderSubmit(draft),
  ].join("\n");
}

export function renderFinished(): string {
  return `<section class="finished"><h2>Batch complete</h2>
<p>Thanks! You can close this tab or reload to claim another batch.</p></section>`;
}

export function renderNoBatch(): string {
  return `<section class="finished"><h2>No work available</h2>
<p>Every batch is claimed. Thanks for helping!</p></section>`;
}
