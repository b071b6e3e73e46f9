import { describe, expect, it } from "vitest";

import type { ItemResponse, PageModel } from "../src/api.js";
import { HeadToHeadPage } from "../src/headtohead.js";
import { PageTimer } from "../src/timing.js";

function h2hPage(): PageModel {
  // mirrors what the service serves: left/right pre-randomized, no sources
  return {
    study_id: "s3",
    page_id: "s3-p0000",
    kind: "head_to_head",
    flow_mode: "mcqa",
    items: [
      {
        item_id: "pair1",
        context: "What can a cat do?",
        gold_label: "meow",
        left_text: "A cat can meow as a way to vocalize.",
        right_text: "the cat is a small mammal",
      },
    ],
  };
}

function makePage() {
  const submitted: { responses: ItemResponse[]; elapsed: number }[] = [];
  const controller = new HeadToHeadPage(
    h2hPage(),
    async (responses, elapsed) => {
      submitted.push({ responses, elapsed });
    },
    new PageTimer(() => 0),
  );
  document.body.innerHTML = "";
  document.body.append(controller.root);
  return { controller, submitted, root: controller.root };
}

function pick(root: HTMLElement, id: string): void {
  const input = root.querySelector(`#${id}`) as HTMLInputElement;
  input.checked = true;
  input.dispatchEvent(new Event("change", { bubbles: true }));
}

describe("HeadToHeadPage", () => {
  it("requires a choice before submit enables", () => {
    const { controller, root } = makePage();
    expect(controller.submitEnabled()).toBe(false);
    pick(root, "choice-pair1-left");
    expect(controller.submitEnabled()).toBe(true);
  });

  it("offers a three-way choice and submits tie as tie", async () => {
    const { root, submitted } = makePage();
    expect(root.querySelector("#choice-pair1-left")).not.toBeNull();
    expect(root.querySelector("#choice-pair1-right")).not.toBeNull();
    expect(root.querySelector("#choice-pair1-tie")).not.toBeNull();
    pick(root, "choice-pair1-tie");
    (root.querySelector("button.submit") as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve();
    expect(submitted[0].responses[0].payload).toEqual({ choice: "tie" });
  });

  it("instructions carry the gold-label directive and only the gold answer shows", () => {
    const { root } = makePage();
    expect(root.querySelector(".instructions")?.textContent).toContain(
      "Pretend the given answer is correct",
    );
    expect(root.textContent).toContain("Answer: meow");
    // no distractor choices anywhere in the DOM (the page payload has none)
    expect(root.textContent).not.toContain("sleep all day");
  });
});
