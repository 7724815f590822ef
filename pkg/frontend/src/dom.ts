/** Tiny DOM construction helper; no framework, no templates. */

type Child = Node | string | null | undefined

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | boolean | EventListener> = {},
  ...children: Child[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag)
  for (const [key, value] of Object.entries(attrs)) {
    if (typeof value === 'function') {
      node.addEventListener(key.replace(/^on/, ''), value)
    } else if (typeof value === 'boolean') {
      if (value) node.setAttribute(key, '')
      else node.removeAttribute(key)
      if (key === 'disabled') (node as unknown as { disabled: boolean }).disabled = value
      if (key === 'open') (node as unknown as { open: boolean }).open = value
    } else {
      node.setAttribute(key, value)
    }
  }
  for (const child of children) {
    if (child === null || child === undefined) continue
    node.append(typeof child === 'string' ? document.createTextNode(child) : child)
  }
  return node
}

export function clear(node: HTMLElement): HTMLElement {
  node.replaceChildren()
  return node
}

export function fmt(value: number, digits = 3): string {
  return Number.isFinite(value) ? value.toFixed(digits) : 'n/a'
}
