/** Page wiring: claim a batch, walk the two-step flow, submit, repeat. */

import { ApiClient, ApiError } from "./api.js";
import { AnnotationSession } from "./flow.js";
import type { EntityChoice, FeatureChoice } from "./flow.js";
import {
  renderFinished,
  renderNoBatch,
  renderScreen,
} from "./render.js";
import { LocalDraftStore, loadWorkerToken, saveWorkerToken } from "./storage.js";
import type { FeatureName } from "./types.js";

async function start(): Promise<void> {
  const root = document.getElementById("app");
  if (root === null) throw new Error("missing #app container");
  const api = new ApiClient("");
  let token = loadWorkerToken(window.localStorage);
  if (token === null) {
    token = await api.register();
    saveWorkerToken(window.localStorage, token);
  }

  const batch = await api.nextBatch(token);
  if (batch === null) {
    root.innerHTML = renderNoBatch();
    return;
  }
  const session = new AnnotationSession(batch.items, new LocalDraftStore(window.localStorage));

  const redraw = () => {
    const item = session.current();
    if (item === null) {
      root.innerHTML = renderFinished();
      return;
    }
    root.innerHTML = renderScreen(item, session.visibleExchanges(item), session.draft(),
                                  session.position());
    bind();
  };

  const bind = () => {
    for (const button of root.querySelectorAll<HTMLButtonElement>("[data-entity-slot]")) {
      button.addEventListener("click", () => {
        const slot = Number(button.dataset.entitySlot) as 0 | 1;
        session.chooseEntity(slot, button.dataset.entityChoice as EntityChoice);
        redraw();
      });
    }
    for (const button of root.querySelectorAll<HTMLButtonElement>("[data-feature-choice]")) {
      button.addEventListener("click", () => {
        session.chooseFeature(button.dataset.feature as FeatureName,
                              button.dataset.featureChoice as FeatureChoice);
        redraw();
      });
    }
    const submit = root.querySelector<HTMLButtonElement>("#submit");
    submit?.addEventListener("click", async () => {
      submit.disabled = true;
      try {
        await api.submit(token as string, session.buildPayload());
        session.advance();
      } catch (err) {
        if (err instanceof ApiError && err.isDuplicate) {
          session.advance(); // already stored server-side: skip forward
        } else if (err instanceof ApiError) {
          window.alert(err.detail);
          submit.disabled = false;
          return;
        } else {
          window.alert("network problem, your draft is saved; try again");
          submit.disabled = false;
          return;
        }
      }
      redraw();
    });
  };

  redraw();
}

start().catch((err) => {
  const root = document.getElementById("app");
  if (root !== null) {
    root.innerHTML = `<p class="error">failed to start: ${String(err)}</p>`;
  }
});
