import { describe, expect, it } from "vitest";

import {
  AbsoluteState,
  absoluteComplete,
  buildAbsolutePayload,
  partOneComplete,
  pruneHidden,
  visibleQuestions,
} from "../src/flow.js";

const fullState: AbsoluteState = {
  factuality: "generally_true",
  grammar: true,
  new_info: true,
  supports_label: true,
  amount_info: "enough",
  acceptable: true,
};

describe("visibleQuestions", () => {
  it("mcqa hides supports-label until new_info is yes", () => {
    expect(visibleQuestions({ new_info: false }, "mcqa").supports_label).toBe(false);
    expect(visibleQuestions({ new_info: true }, "mcqa").supports_label).toBe(true);
    expect(visibleQuestions({}, "mcqa").supports_label).toBe(false);
  });

  it("nli always asks supports-label", () => {
    expect(visibleQuestions({ new_info: false }, "nli").supports_label).toBe(true);
    expect(visibleQuestions({}, "nli").supports_label).toBe(true);
  });

  it("amount-info requires a yes on supports-label in both modes", () => {
    for (const mode of ["mcqa", "nli"] as const) {
      expect(visibleQuestions({ new_info: true, supports_label: false }, mode).amount_info).toBe(false);
      expect(visibleQuestions({ new_info: true, supports_label: true }, mode).amount_info).toBe(true);
    }
    expect(visibleQuestions({ new_info: false, supports_label: true }, "mcqa").amount_info).toBe(false);
  });
});

describe("pruneHidden", () => {
  it("drops stale conditional answers after flipping new_info back to no", () => {
    const flipped = pruneHidden({ ...fullState, new_info: false }, "mcqa");
    expect(flipped.supports_label).toBeUndefined();
    expect(flipped.amount_info).toBeUndefined();
  });

  it("keeps supports-label in nli mode but prunes amount when support is no", () => {
    const pruned = pruneHidden(
      { ...fullState, new_info: false, supports_label: false },
      "nli",
    );
    expect(pruned.supports_label).toBe(false);
    expect(pruned.amount_info).toBeUndefined();
  });
});

describe("completion and payloads", () => {
  it("part one requires factuality and grammar", () => {
    expect(partOneComplete({})).toBe(false);
    expect(partOneComplete({ factuality: "generally_true" })).toBe(false);
    expect(partOneComplete({ factuality: "generally_true", grammar: false })).toBe(true);
  });

  it("builds the service payload shape with nulls for unasked questions", () => {
    const payload = buildAbsolutePayload(
      {
        factuality: "need_more_info",
        grammar: true,
        new_info: false,
        acceptable: false,
      },
      "mcqa",
    );
    expect(payload).toEqual({
      factuality: "need_more_info",
      grammar: true,
      new_info: false,
      supports_label: null,
      amount_info: null,
      acceptable: false,
    });
  });

  it("nli payload carries supports-label even when new_info is no", () => {
    const payload = buildAbsolutePayload(
      {
        factuality: "generally_true",
        grammar: true,
        new_info: false,
        supports_label: true,
        amount_info: "enough",
        acceptable: true,
      },
      "nli",
    );
    expect(payload.supports_label).toBe(true);
    expect(payload.amount_info).toBe("enough");
  });

  it("refuses to build incomplete payloads", () => {
    expect(() =>
      buildAbsolutePayload({ factuality: "generally_true", grammar: true }, "mcqa"),
    ).toThrow();
    // supports-label visible in nli mode but unanswered
    expect(
      absoluteComplete(
        { factuality: "generally_true", grammar: true, new_info: false, acceptable: true },
        "nli",
      ),
    ).toBe(false);
  });
});
