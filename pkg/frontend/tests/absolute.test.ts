import { describe, expect, it } from "vitest";

import type { ItemResponse, PageModel } from "../src/api.js";
import { AbsolutePage } from "../src/absolute.js";
import { PageTimer } from "../src/timing.js";

function absolutePage(flowMode: "mcqa" | "nli"): PageModel {
  return {
    study_id: "s2",
    page_id: "s2-p0000",
    kind: "absolute",
    flow_mode: flowMode,
    items: [
      {
        item_id: "a1",
        context: "Which tool cuts wood?",
        gold_label: "saw",
        explanation: "A saw has a toothed blade made for cutting.",
      },
    ],
  };
}

function pick(root: HTMLElement, id: string): void {
  const input = root.querySelector(`#${id}`) as HTMLInputElement | null;
  if (!input) throw new Error(`no input ${id}`);
  input.checked = true;
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

function makePage(flowMode: "mcqa" | "nli") {
  const submitted: { responses: ItemResponse[]; elapsed: number }[] = [];
  const controller = new AbsolutePage(
    absolutePage(flowMode),
    async (responses, elapsed) => {
      submitted.push({ responses, elapsed });
    },
    new PageTimer(() => 0),
  );
  document.body.innerHTML = "";
  document.body.append(controller.root);
  return { controller, submitted, root: controller.root };
}

function completePartOne(root: HTMLElement): void {
  pick(root, "factuality-a1-generally_true");
  pick(root, "grammar-a1-yes");
  (root.querySelector("button.continue") as HTMLButtonElement).click();
}

describe("AbsolutePage two-part flow", () => {
  it("part 2 is unreachable until part 1 is submitted", () => {
    const { root } = makePage("mcqa");
    expect(root.querySelector("[data-question^=new-info]")).toBeNull();
    expect(root.querySelector(".part-two")?.children.length).toBe(0);
    const cont = root.querySelector("button.continue") as HTMLButtonElement;
    expect(cont.disabled).toBe(true);
    pick(root, "factuality-a1-generally_true");
    expect(cont.disabled).toBe(true); // grammar still unanswered
    pick(root, "grammar-a1-yes");
    expect(cont.disabled).toBe(false);
    cont.click();
    expect(root.querySelector("[data-question^=new-info]")).not.toBeNull();
  });

  it("context stays hidden during part 1 and appears in part 2", () => {
    const { root } = makePage("mcqa");
    expect(root.textContent).not.toContain("Which tool cuts wood?");
    completePartOne(root);
    expect(root.querySelector(".part-two")?.textContent).toContain("Which tool cuts wood?");
    expect(root.querySelector(".part-two")?.textContent).toContain("saw");
  });

  it("mcqa: supports-label and amount-info never appear when new_info is no", () => {
    const { root, controller } = makePage("mcqa");
    completePartOne(root);
    pick(root, "new-info-a1-no");
    expect(root.querySelector("[data-question^=supports-label]")).toBeNull();
    expect(root.querySelector("[data-question^=amount-info]")).toBeNull();
    // acceptable is still asked
    expect(root.querySelector("[data-question^=acceptable]")).not.toBeNull();
    pick(root, "acceptable-a1-yes");
    expect(controller.submitEnabled()).toBe(true);
  });

  it("mcqa: the conditional chain reveals question by question", () => {
    const { root } = makePage("mcqa");
    completePartOne(root);
    pick(root, "new-info-a1-yes");
    expect(root.querySelector("[data-question^=supports-label]")).not.toBeNull();
    expect(root.querySelector("[data-question^=amount-info]")).toBeNull();
    pick(root, "supports-label-a1-yes");
    expect(root.querySelector("[data-question^=amount-info]")).not.toBeNull();
    pick(root, "supports-label-a1-no");
    expect(root.querySelector("[data-question^=amount-info]")).toBeNull();
  });

  it("nli: supports-label is shown even when new_info is no", () => {
    const { root } = makePage("nli");
    completePartOne(root);
    pick(root, "new-info-a1-no");
    expect(root.querySelector("[data-question^=supports-label]")).not.toBeNull();
  });

  it("flipping new_info back to no clears stale conditional answers", async () => {
    const { root, controller, submitted } = makePage("mcqa");
    completePartOne(root);
    pick(root, "new-info-a1-yes");
    pick(root, "supports-label-a1-yes");
    pick(root, "amount-info-a1-enough");
    pick(root, "new-info-a1-no");
    pick(root, "acceptable-a1-no");
    expect(controller.submitEnabled()).toBe(true);
    (root.querySelector("button.submit") as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve();
    const payload = submitted[0].responses[0].payload;
    expect(payload.new_info).toBe(false);
    expect(payload.supports_label).toBeNull();
    expect(payload.amount_info).toBeNull();
  });

  it("submits a payload the service flow validation accepts", async () => {
    const { root, submitted } = makePage("nli");
    completePartOne(root);
    pick(root, "new-info-a1-no");
    pick(root, "supports-label-a1-yes");
    pick(root, "amount-info-a1-not_enough");
    pick(root, "acceptable-a1-yes");
    (root.querySelector("button.submit") as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve();
    expect(submitted[0].responses[0].payload).toEqual({
      factuality: "generally_true",
      grammar: true,
      new_info: false,
      supports_label: true,
      amount_info: "not_enough",
      acceptable: true,
    });
  });
});
