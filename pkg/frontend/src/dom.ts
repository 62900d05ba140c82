/** Smallest possible VNode-to-DOM bridge.
 *
 * Takes any object that looks like a document (createElement /
 * createTextNode) so the mapping is testable without a browser.
 */

import type { VNode } from "./render.js";

export interface ElementLike {
  setAttribute(name: string, value: string): void;
  appendChild(child: unknown): void;
  replaceChildren?(...children: unknown[]): void;
}

export interface DocumentLike {
  createElement(tag: string): ElementLike;
  createTextNode(text: string): unknown;
}

export function toDom(node: VNode | string, doc: DocumentLike): unknown {
  if (typeof node === "string") {
    return doc.createTextNode(node);
  }
  const el = doc.createElement(node.tag);
  for (const [name, value] of Object.entries(node.props)) {
    el.setAttribute(name, value);
  }
  for (const child of node.children) {
    el.appendChild(toDom(child, doc));
  }
  return el;
}

/** Replace `host`'s children with the rendered tree. */
export function mount(host: ElementLike, node: VNode, doc: DocumentLike): void {
  const rendered = toDom(node, doc);
  if (host.replaceChildren) {
    host.replaceChildren(rendered);
  } else {
    host.appendChild(rendered);
  }
}
