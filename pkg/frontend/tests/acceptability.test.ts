import { beforeEach, describe, expect, it } from "vitest";

import type { ItemResponse, PageModel } from "../src/api.js";
import { AcceptabilityPage } from "../src/acceptability.js";
import { PageTimer } from "../src/timing.js";

function page(n = 5): PageModel {
  return {
    study_id: "s1",
    page_id: "s1-p0000",
    kind: "acceptability",
    flow_mode: "mcqa",
    items: Array.from({ length: n }, (_, i) => ({
      item_id: `c${i}`,
      context: `Will plan ${i} work?`,
      gold_label: "yes",
      explanation: `Because of reason ${i}.`,
    })),
  };
}

function click(root: HTMLElement, selector: string): void {
  const node = root.querySelector(selector) as HTMLElement | null;
  if (!node) throw new Error(`no element ${selector}`);
  node.dispatchEvent(new Event("change", { bubbles: true }));
  if (node instanceof HTMLInputElement) node.checked = true;
}

function answer(root: HTMLElement, itemId: string, value: "yes" | "no"): void {
  click(root, `#accept-${itemId}-${value}`);
}

describe("AcceptabilityPage", () => {
  let submitted: { responses: ItemResponse[]; elapsed: number }[];
  let failNext: boolean;
  let pageController: AcceptabilityPage;
  let clockNow: number;

  beforeEach(() => {
    submitted = [];
    failNext = false;
    clockNow = 1000;
    const timer = new PageTimer(() => clockNow);
    pageController = new AcceptabilityPage(
      page(),
      async (responses, elapsed) => {
        if (failNext) {
          failNext = false;
          throw new Error("network down");
        }
        submitted.push({ responses, elapsed });
      },
      timer,
    );
    document.body.innerHTML = "";
    document.body.append(pageController.root);
  });

  it("keeps submit disabled until all five are answered", () => {
    const root = pageController.root;
    for (let i = 0; i < 4; i++) answer(root, `c${i}`, "yes");
    expect(pageController.answeredCount()).toBe(4);
    expect(pageController.submitEnabled()).toBe(false);
    answer(root, "c4", "no");
    expect(pageController.submitEnabled()).toBe(true);
  });

  it("emits exactly five judgments sharing one elapsed time", async () => {
    const root = pageController.root;
    for (let i = 0; i < 5; i++) answer(root, `c${i}`, i % 2 === 0 ? "yes" : "no");
    clockNow += 34_000; // rater thinks for 34 seconds
    (root.querySelector("button.submit") as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve();
    expect(submitted).toHaveLength(1);
    const { responses, elapsed } = submitted[0];
    expect(responses).toHaveLength(5);
    expect(elapsed).toBe(34_000);
    expect(responses.map((r) => r.payload.accept)).toEqual([true, false, true, false, true]);
  });

  it("preserves answers and allows retry after a failed submit", async () => {
    const root = pageController.root;
    for (let i = 0; i < 5; i++) answer(root, `c${i}`, "yes");
    failNext = true;
    (root.querySelector("button.submit") as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve();
    expect(submitted).toHaveLength(0);
    expect(root.querySelector(".status .error")?.textContent).toContain("retry");
    expect(pageController.answeredCount()).toBe(5);
    expect(pageController.submitEnabled()).toBe(true);
    (root.querySelector("button.submit") as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve();
    expect(submitted).toHaveLength(1);
    expect(submitted[0].responses).toHaveLength(5);
  });
});
