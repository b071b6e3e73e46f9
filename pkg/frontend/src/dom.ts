/** Tiny DOM helpers: element builder and radio groups with change hooks. */

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: (Node | string)[] = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "text") node.textContent = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

export interface RadioOption<T extends string> {
  value: T;
  label: string;
}

/** A named radio group; onChange fires with the picked value. */
export function radioGroup<T extends string>(
  name: string,
  options: RadioOption<T>[],
  onChange: (value: T) => void,
): HTMLElement {
  const wrapper = el("div", { class: "radio-group", "data-question": name });
  for (const option of options) {
    const input = el("input", {
      type: "radio",
      name,
      value: option.value,
      id: `${name}-${option.value}`,
    });
    input.addEventListener("change", () => onChange(option.value));
    const label = el("label", { for: `${name}-${option.value}` }, [option.label]);
    wrapper.append(el("div", { class: "radio-option" }, [input, label]));
  }
  return wrapper;
}

export function yesNoGroup(name: string, onChange: (value: boolean) => void): HTMLElement {
  return radioGroup(
    name,
    [
      { value: "yes", label: "Yes" },
      { value: "no", label: "No" },
    ],
    (value) => onChange(value === "yes"),
  );
}

export function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}
