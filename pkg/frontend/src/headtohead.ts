/** Head-to-head page: the task, its gold answer, and two explanations whose
 * left/right order arrived pre-randomized from the server. The rater picks
 * left, right, or "equally good"; submit is gated on a choice for every
 * item on the page. */

import type { ItemResponse, PageModel } from "./api.js";
import { clear, el, radioGroup } from "./dom.js";
import { PageTimer } from "./timing.js";
import type { SubmitFn } from "./acceptability.js";

export type H2HChoice = "left" | "right" | "tie";

const INSTRUCTIONS =
  "Read the task and its answer, then pick the explanation that better " +
  "explains the answer. Pretend the given answer is correct, even if you " +
  "disagree with it, and ignore minor spelling or casing mistakes.";

export class HeadToHeadPage {
  readonly root: HTMLElement;
  private readonly choices = new Map<string, H2HChoice>();
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
    this.root = el("div", { class: "page head-to-head-page" });
    this.root.append(el("p", { class: "instructions", text: INSTRUCTIONS }));
    for (const item of page.items) {
      const block = el("div", { class: "item", "data-item": item.item_id });
      if (item.context) block.append(el("p", { class: "context", text: item.context }));
      if (item.gold_label) {
        block.append(el("p", { class: "gold", text: `Answer: ${item.gold_label}` }));
      }
      block.append(
        el("div", { class: "pair" }, [
          el("div", { class: "left" }, [
            el("h4", { text: "Explanation 1" }),
            el("p", { text: item.left_text ?? "" }),
          ]),
          el("div", { class: "right" }, [
            el("h4", { text: "Explanation 2" }),
            el("p", { text: item.right_text ?? "" }),
          ]),
        ]),
      );
      block.append(
        radioGroup<H2HChoice>(
          `choice-${item.item_id}`,
          [
            { value: "left", label: "Explanation 1 is better" },
            { value: "right", label: "Explanation 2 is better" },
            { value: "tie", label: "They are equally good" },
          ],
          (value) => {
            this.choices.set(item.item_id, value);
            this.update();
          },
        ),
      );
      this.root.append(block);
    }
    this.submitButton = el("button", { class: "submit", text: "Submit" });
    this.submitButton.disabled = true;
    this.submitButton.addEventListener("click", () => void this.onSubmit());
    this.status = el("div", { class: "status" });
    this.root.append(this.submitButton, this.status);
  }

  submitEnabled(): boolean {
    return !this.submitButton.disabled;
  }

  private update(): void {
    this.submitButton.disabled =
      this.submitting || this.choices.size < this.page.items.length;
  }

  private async onSubmit(): Promise<void> {
    if (this.choices.size < this.page.items.length) return;
    const responses: ItemResponse[] = this.page.items.map((item) => ({
      item_id: item.item_id,
      payload: { choice: this.choices.get(item.item_id)! },
    }));
    const elapsed = this.timer.elapsedMs();
    this.submitting = true;
    this.update();
    clear(this.status);
    try {
      await this.submit(responses, elapsed);
      this.status.append(el("span", { class: "ok", text: "Submitted." }));
    } catch (error) {
      this.submitting = false;
      this.update();
      this.status.append(
        el("span", { class: "error", text: `Submit failed, please retry: ${error}` }),
      );
    }
  }
}
