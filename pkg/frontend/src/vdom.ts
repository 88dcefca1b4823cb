// A minimal virtual-node layer so the view functions stay pure and testable
// in Node without a browser; mount() projects a tree onto the real DOM.

export interface VNode {
  tag: string;
  attrs: Record<string, string | boolean>;
  children: (VNode | string)[];
}

export function h(
  tag: string,
  attrs: Record<string, string | boolean> = {},
  ...children: (VNode | string | null | undefined | false)[]
): VNode {
  return {
    tag,
    attrs,
    children: children.filter((c): c is VNode | string => c !== null && c !== undefined && c !== false),
  };
}

/** Depth-first collection of nodes matching a predicate (test helper). */
export function findAll(node: VNode, pred: (n: VNode) => boolean): VNode[] {
  const out: VNode[] = [];
  const walk = (n: VNode) => {
    if (pred(n)) out.push(n);
    for (const child of n.children) {
      if (typeof child !== "string") walk(child);
    }
  };
  walk(node);
  return out;
}

export function byClass(node: VNode, cls: string): VNode[] {
  return findAll(node, (n) => {
    const c = n.attrs["class"];
    return typeof c === "string" && c.split(/\s+/).includes(cls);
  });
}

export function textOf(node: VNode): string {
  let out = "";
  for (const child of node.children) {
    out += typeof child === "string" ? child : textOf(child);
  }
  return out;
}

/** Replace `root`'s content with the rendered tree (naive full re-render). */
export function mount(root: Element, node: VNode): void {
  root.replaceChildren(toDom(node, root.ownerDocument));
}

function toDom(node: VNode, doc: Document): Element {
  const el = doc.createElement(node.tag);
  for (const [name, value] of Object.entries(node.attrs)) {
    if (value === false) continue;
    if (value === true) el.setAttribute(name, "");
    else el.setAttribute(name, value);
    if (name === "disabled") (el as HTMLButtonElement).disabled = true;
  }
  for (const child of node.children) {
    el.append(typeof child === "string" ? doc.createTextNode(child) : toDom(child, doc));
  }
  return el;
}
