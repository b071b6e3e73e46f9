/** Pure state logic for the two-part absolute evaluation flow.
 *
 * Part 1 judges the explanation in isolation (factuality, grammar); part 2
 * reveals the task context and walks the conditional chain: label support is
 * asked only when the explanation adds new information (always asked in NLI
 * mode), and amount-of-information only when the support answer is yes.
 * Keeping this pure guarantees the UI can only build payloads the service's
 * flow validation accepts: hidden questions are hard-nulled here.
 */

import type { FlowMode } from "./api.js";

export type Factuality =
  | "generally_false"
  | "sometimes_true"
  | "generally_true"
  | "need_more_info";
export type AmountInfo = "not_enough" | "enough" | "too_much";

export interface AbsoluteState {
  factuality?: Factuality;
  grammar?: boolean;
  new_info?: boolean;
  supports_label?: boolean;
  amount_info?: AmountInfo;
  acceptable?: boolean;
}

export const FACTUALITY_OPTIONS: { value: Factuality; label: string }[] = [
  { value: "generally_false", label: "Generally false" },
  { value: "sometimes_true", label: "Sometimes or partially true" },
  { value: "generally_true", label: "Generally true" },
  { value: "need_more_info", label: "Need more information to judge" },
];

export const AMOUNT_OPTIONS: { value: AmountInfo; label: string }[] = [
  { value: "not_enough", label: "Not enough" },
  { value: "enough", label: "Enough" },
  { value: "too_much", label: "Too much" },
];

export function partOneComplete(state: AbsoluteState): boolean {
  return state.factuality !== undefined && state.grammar !== undefined;
}

/** Which conditional part-2 questions the flow asks right now. */
export function visibleQuestions(
  state: AbsoluteState,
  flowMode: FlowMode,
): { supports_label: boolean; amount_info: boolean } {
  const supportsVisible = flowMode === "nli" ? true : state.new_info === true;
  const amountVisible = supportsVisible && state.supports_label === true;
  return { supports_label: supportsVisible, amount_info: amountVisible };
}

/** Drop answers to questions the flow no longer asks (e.g. the rater flipped
 * new-info back to "no"), so stale answers can never leak into a payload. */
export function pruneHidden(state: AbsoluteState, flowMode: FlowMode): AbsoluteState {
  const visible = visibleQuestions(state, flowMode);
  const next: AbsoluteState = { ...state };
  if (!visible.supports_label) delete next.supports_label;
  if (!visibleQuestions(next, flowMode).amount_info) delete next.amount_info;
  return next;
}

export function absoluteComplete(state: AbsoluteState, flowMode: FlowMode): boolean {
  if (!partOneComplete(state)) return false;
  if (state.new_info === undefined || state.acceptable === undefined) return false;
  const visible = visibleQuestions(state, flowMode);
  if (visible.supports_label && state.supports_label === undefined) return false;
  if (visible.amount_info && state.amount_info === undefined) return false;
  return true;
}

/** The exact payload shape the service validates; throws when the flow is
 * incomplete rather than guessing. */
export function buildAbsolutePayload(
  state: AbsoluteState,
  flowMode: FlowMode,
): Record<string, unknown> {
  const pruned = pruneHidden(state, flowMode);
  if (!absoluteComplete(pruned, flowMode)) {
    throw new Error("absolute flow incomplete");
  }
  const visible = visibleQuestions(pruned, flowMode);
  return {
    factuality: pruned.factuality,
    grammar: pruned.grammar,
    new_info: pruned.new_info,
    supports_label: visible.supports_label ? pruned.supports_label : null,
    amount_info: visible.amount_info ? pruned.amount_info : null,
    acceptable: pruned.acceptable,
  };
}
