/** Two-part absolute evaluation (also used by qualification exam pages).
 *
 * Part 1 shows the explanation alone and asks factuality and grammar; only
 * after part 1 is confirmed does part 2 reveal the task context and walk the
 * conditional questions. Conditional questions are physically absent from
 * the DOM while the flow does not ask them, and their answers are pruned the
 * moment they hide, so the page can only ever submit payloads the service's
 * flow validation accepts. */

import type { FlowMode, ItemResponse, PageItem, PageModel } from "./api.js";
import { clear, el, radioGroup, yesNoGroup } from "./dom.js";
import { PageTimer } from "./timing.js";
import type { SubmitFn } from "./acceptability.js";
import {
  AbsoluteState,
  AMOUNT_OPTIONS,
  buildAbsolutePayload,
  FACTUALITY_OPTIONS,
  absoluteComplete,
  partOneComplete,
  pruneHidden,
  visibleQuestions,
} from "./flow.js";

const PART1_INSTRUCTIONS =
  "First judge the statement below on its own, without seeing the task it " +
  "is meant to explain.";
const PART2_INSTRUCTIONS =
  "Now the task and its answer are revealed. Pretend the given answer is " +
  "correct, even if you disagree with it.";

class ItemFlow {
  readonly root: HTMLElement;
  state: AbsoluteState = {};
  private partOneDone = false;
  private readonly partTwo: HTMLElement;

  constructor(
    private readonly item: PageItem,
    private readonly flowMode: FlowMode,
    private readonly onChange: () => void,
  ) {
    this.root = el("div", { class: "item absolute-item", "data-item": item.item_id });
    const partOne = el("div", { class: "part-one" });
    partOne.append(el("p", { class: "instructions", text: PART1_INSTRUCTIONS }));
    partOne.append(el("p", { class: "explanation", text: item.explanation ?? "" }));
    partOne.append(el("p", { class: "question-label", text: "How factual is this statement?" }));
    partOne.append(
      radioGroup(`factuality-${item.item_id}`, FACTUALITY_OPTIONS, (value) => {
        this.state.factuality = value;
        this.update();
      }),
    );
    partOne.append(el("p", { class: "question-label", text: "Is this statement grammatical?" }));
    partOne.append(
      yesNoGroup(`grammar-${item.item_id}`, (value) => {
        this.state.grammar = value;
        this.update();
      }),
    );
    this.continueButton = el("button", {
      class: "continue",
      text: "Continue to part 2",
    });
    this.continueButton.disabled = true;
    this.continueButton.addEventListener("click", () => {
      if (!partOneComplete(this.state)) return;
      this.partOneDone = true;
      this.continueButton.disabled = true;
      this.renderPartTwo();
      this.onChange();
    });
    partOne.append(this.continueButton);
    this.partTwo = el("div", { class: "part-two" });
    this.root.append(partOne, this.partTwo);
  }

  private readonly continueButton: HTMLButtonElement;

  revealed(): boolean {
    return this.partOneDone;
  }

  complete(): boolean {
    return this.partOneDone && absoluteComplete(this.state, this.flowMode);
  }

  payload(): Record<string, unknown> {
    return buildAbsolutePayload(this.state, this.flowMode);
  }

  private update(): void {
    if (!this.partOneDone) {
      this.continueButton.disabled = !partOneComplete(this.state);
    } else {
      this.state = pruneHidden(this.state, this.flowMode);
      this.renderPartTwo();
    }
    this.onChange();
  }

  /** Part 2 re-renders from state on every change: conditional questions are
   * created only while the flow asks them. */
  private renderPartTwo(): void {
    clear(this.partTwo);
    if (!this.partOneDone) return;
    this.partTwo.append(el("p", { class: "instructions", text: PART2_INSTRUCTIONS }));
    if (this.item.context) {
      this.partTwo.append(el("p", { class: "context", text: this.item.context }));
    }
    if (this.item.gold_label) {
      this.partTwo.append(
        el("p", { class: "gold", text: `Answer: ${this.item.gold_label}` }),
      );
    }
    this.partTwo.append(
      el("p", {
        class: "question-label",
        text:
          "Does the explanation provide new facts, information or reasoning " +
          "not already stated in the task and answer?",
      }),
    );
    const newInfo = yesNoGroup(`new-info-${this.item.item_id}`, (value) => {
      this.state.new_info = value;
      this.update();
    });
    this.reflect(newInfo, this.state.new_info);
    this.partTwo.append(newInfo);

    const visible = visibleQuestions(this.state, this.flowMode);
    if (visible.supports_label) {
      this.partTwo.append(
        el("p", {
          class: "question-label",
          text: "Is the new information relevant to justifying the answer?",
        }),
      );
      const supports = yesNoGroup(`supports-label-${this.item.item_id}`, (value) => {
        this.state.supports_label = value;
        this.update();
      });
      this.reflect(supports, this.state.supports_label);
      this.partTwo.append(supports);
    }
    if (visible.amount_info) {
      this.partTwo.append(
        el("p", {
          class: "question-label",
          text: "How much information does the explanation have to justify the answer?",
        }),
      );
      const amount = radioGroup(`amount-info-${this.item.item_id}`, AMOUNT_OPTIONS, (value) => {
        this.state.amount_info = value;
        this.update();
      });
      this.reflectValue(amount, this.state.amount_info);
      this.partTwo.append(amount);
    }
    this.partTwo.append(
      el("p", { class: "question-label", text: "Is the explanation acceptable?" }),
    );
    const acceptable = yesNoGroup(`acceptable-${this.item.item_id}`, (value) => {
      this.state.acceptable = value;
      this.update();
    });
    this.reflect(acceptable, this.state.acceptable);
    this.partTwo.append(acceptable);
  }

  private reflect(group: HTMLElement, value: boolean | undefined): void {
    if (value === undefined) return;
    const wanted = value ? "yes" : "no";
    for (const input of group.querySelectorAll("input")) {
      input.checked = input.value === wanted;
    }
  }

  private reflectValue(group: HTMLElement, value: string | undefined): void {
    if (value === undefined) return;
    for (const input of group.querySelectorAll("input")) {
      input.checked = input.value === value;
    }
  }
}

export class AbsolutePage {
  readonly root: HTMLElement;
  private readonly flows: ItemFlow[];
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
    this.root = el("div", { class: "page absolute-page" });
    this.flows = page.items.map(
      (item) => new ItemFlow(item, page.flow_mode, () => this.update()),
    );
    for (const flow of this.flows) this.root.append(flow.root);
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
    this.submitButton.disabled = this.submitting || !this.flows.every((f) => f.complete());
  }

  private async onSubmit(): Promise<void> {
    if (!this.flows.every((f) => f.complete())) return;
    const responses: ItemResponse[] = this.page.items.map((item, i) => ({
      item_id: item.item_id,
      payload: this.flows[i].payload(),
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
