/** Acceptability page: five explanations, one yes/no each. Submit stays
 * disabled until every explanation is answered; all five judgments go out in
 * one request sharing the hidden page timer's elapsed time. A failed submit
 * keeps the answers and lets the rater retry. */

import type { ItemResponse, PageModel } from "./api.js";
import { clear, el, yesNoGroup } from "./dom.js";
import { PageTimer } from "./timing.js";

export type SubmitFn = (responses: ItemResponse[], elapsedMs: number) => Promise<void>;

const INSTRUCTIONS =
  "For each explanation below, decide whether it is an acceptable " +
  "explanation of the given answer. Pretend the given answer is correct, " +
  "even if you disagree with it, and ignore minor spelling mistakes.";

export class AcceptabilityPage {
  readonly root: HTMLElement;
  private readonly answers = new Map<string, boolean>();
  private readonly timer: PageTimer;
  private readonly submitButton: HTMLButtonElement;
  private readonly status: HTMLElement;
  private submitting = false;

  constructor(
    private readonly page: PageModel,
    private readonly submit: SubmitFn,
    timer?: PageTimer,
  ) {
    this.timer = timer ?? new PageTimer();
    this.root = el("div", { class: "page acceptability-page" });
    this.root.append(el("p", { class: "instructions", text: INSTRUCTIONS }));
    for (const item of page.items) {
      const block = el("div", { class: "item", "data-item": item.item_id });
      if (item.context) block.append(el("p", { class: "context", text: item.context }));
      if (item.gold_label) {
        block.append(el("p", { class: "gold", text: `Answer: ${item.gold_label}` }));
      }
      block.append(el("p", { class: "explanation", text: item.explanation ?? "" }));
      block.append(
        el("p", { class: "question-label", text: "Is this explanation acceptable?" }),
      );
      block.append(
        yesNoGroup(`accept-${item.item_id}`, (value) => {
          this.answers.set(item.item_id, value);
          this.update();
        }),
      );
      this.root.append(block);
    }
    this.submitButton = el("button", { class: "submit", text: "Submit" });
    this.submitButton.disabled = true;
    this.submitButton.addEventListener("click", () => void this.onSubmit());
    this.status = el("div", { class: "status" });
    this.root.append(this.submitButton, this.status);
  }

  answeredCount(): number {
    return this.answers.size;
  }

  submitEnabled(): boolean {
    return !this.submitButton.disabled;
  }

  private update(): void {
    this.submitButton.disabled =
      this.submitting || this.answers.size < this.page.items.length;
  }

  private async onSubmit(): Promise<void> {
    if (this.answers.size < this.page.items.length) return;
    const responses: ItemResponse[] = this.page.items.map((item) => ({
      item_id: item.item_id,
      payload: { accept: this.answers.get(item.item_id)! },
    }));
    const elapsed = this.timer.elapsedMs();
    this.submitting = true;
    this.update();
    clear(this.status);
    try {
      await this.submit(responses, elapsed);
      this.status.append(el("span", { class: "ok", text: "Submitted." }));
    } catch (error) {
      // answers stay in place; the rater just presses submit again
      this.submitting = false;
      this.update();
      this.status.append(
        el("span", { class: "error", text: `Submit failed, please retry: ${error}` }),
      );
    }
  }
}
