/**
 * Signed-bar SVG chart for per-feature contributions.
 *
 * Bars extend left (pushes the prediction down) or right (pushes it up)
 * from a zero axis; baseline and final prediction are annotated. Sampled
 * attributions get +-3 SE whiskers.
 */

import { AttributionDoc } from '../api.js'
import { fmt } from '../dom.js'

const SVG_NS = 'http://www.w3.org/2000/svg'
const WIDTH = 560
const ROW = 28
const LABEL_W = 170
const PAD = 12

function svgEl(tag: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, tag)
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value)
  return node
}

export function renderAttributionChart(attribution: AttributionDoc): SVGSVGElement {
  const entries = Object.entries(attribution.contributions).sort(
    (a, b) => Math.abs(b[1]) - Math.abs(a[1]),
  )
  const errors = attribution.std_error ?? {}
  const maxMagnitude = Math.max(
    1e-9,
    ...entries.map(([name, value]) => Math.abs(value) + 3 * (errors[name] ?? 0)),
  )
  const plotWidth = WIDTH - LABEL_W - 2 * PAD
  const zeroX = LABEL_W + PAD + plotWidth / 2
  const scale = plotWidth / 2 / maxMagnitude
  const height = entries.length * ROW + 58

  const svg = svgEl('svg', {
    viewBox: `0 0 ${WIDTH} ${height}`,
    width: String(WIDTH),
    height: String(height),
    class: 'attribution-chart',
    'data-testid': 'attribution-chart',
    'data-method': attribution.method,
  }) as SVGSVGElement

  const axis = svgEl('line', {
    x1: String(zeroX),
    y1: '8',
    x2: String(zeroX),
    y2: String(entries.length * ROW + 16),
    class: 'axis',
  })
  svg.append(axis)

  entries.forEach(([name, value], index) => {
    const y = 14 + index * ROW
    const barWidth = Math.abs(value) * scale
    const x = value >= 0 ? zeroX : zeroX - barWidth
    svg.append(
      svgEl('rect', {
        x: String(x),
        y: String(y),
        width: String(Math.max(barWidth, 0.5)),
        height: String(ROW - 10),
        class: value >= 0 ? 'bar positive' : 'bar negative',
        'data-feature': name,
        'data-value': String(value),
      }),
    )
    const label = svgEl('text', {
      x: String(LABEL_W),
      y: String(y + ROW / 2),
      class: 'feature-label',
      'text-anchor': 'end',
    })
    label.textContent = `${name} (${fmt(value)})`
    svg.append(label)

    const stdError = errors[name]
    if (stdError !== undefined && attribution.method === 'sampled_shapley') {
      const centre = zeroX + value * scale
      const half = 3 * stdError * scale
      svg.append(
        svgEl('line', {
          x1: String(centre - half),
          y1: String(y + (ROW - 10) / 2),
          x2: String(centre + half),
          y2: String(y + (ROW - 10) / 2),
          class: 'whisker',
          'data-feature-whisker': name,
        }),
      )
    }
  })

  const annotation = svgEl('text', {
    x: String(LABEL_W + PAD),
    y: String(entries.length * ROW + 40),
    class: 'annotation',
    'data-testid': 'attribution-annotation',
  })
  annotation.textContent =
    `baseline ${fmt(attribution.baseline_prediction)} -> prediction ${fmt(attribution.prediction)}` +
    ` (${attribution.method}${attribution.n_samples ? `, n=${attribution.n_samples}` : ''})`
  svg.append(annotation)
  return svg
}
