/**
 * Service catalog: passport summary, certification badges, and the
 * risk-coverage grid, straight from the API payloads.
 */

import { CoverageReport, ServiceSummary } from '../api.js'
import { clear, el } from '../dom.js'
import { AppState } from '../state.js'

function certificationBadges(service: ServiceSummary): HTMLElement {
  const badges = el('div', { class: 'badges' })
  if (service.certified_for_clinical_use) {
    badges.append(el('span', { class: 'badge badge-certified', 'data-testid': 'badge-certified' }, 'clinical use'))
  } else {
    badges.append(
      el('span', { class: 'badge badge-academic', 'data-testid': 'badge-academic' }, 'academic only'),
    )
  }
  for (const cert of service.certifications) {
    badges.append(
      el(
        'span',
        { class: 'badge badge-scheme', title: `${cert.certificate_number} until ${cert.valid_to}` },
        `${cert.scheme} (${cert.jurisdictions.join(', ')})`,
      ),
    )
  }
  return badges
}

function coverageGrid(report: CoverageReport): HTMLElement {
  const table = el('table', { class: 'coverage-grid', 'data-testid': 'coverage-grid' })
  table.append(
    el(
      'tr',
      {},
      el('th', {}, '#'),
      el('th', {}, 'Risk'),
      el('th', {}, 'Mitigations enabled'),
      el('th', {}, 'Gaps'),
      el('th', {}, 'Covered'),
    ),
  )
  for (const row of report.risks) {
    table.append(
      el(
        'tr',
        { class: row.covered ? 'covered' : 'uncovered' },
        el('td', {}, String(row.risk)),
        el('td', {}, row.label),
        el('td', {}, row.enabled.join(', ') || 'none'),
        el('td', { class: 'gaps' }, row.gaps.join(', ') || 'none'),
        el('td', {}, row.covered ? 'yes' : 'no'),
      ),
    )
  }
  return table
}

export function renderCatalog(
  state: AppState,
  onStartWizard: (service: ServiceSummary) => void,
): HTMLElement {
  const view = el('section', { class: 'view view-catalog' }, el('h2', {}, 'Prediction services'))
  const list = el('div', { class: 'service-list' })
  view.append(list)

  for (const service of state.services) {
    const detail = el('div', { class: 'service-detail' })
    const card = el(
      'article',
      { class: 'service-card', 'data-service': service.service_id },
      el('h3', {}, service.service_id),
      certificationBadges(service),
      el('p', { class: 'purpose' }, service.purpose),
      el('p', { class: 'meta' }, `intended context: ${service.intended_context} | v${service.version} | ${service.manufacturer}`),
      el(
        'ul',
        { class: 'limitations' },
        ...service.declared_limitations.map((text) => el('li', {}, text)),
      ),
      el(
        'div',
        { class: 'card-actions' },
        el(
          'button',
          {
            'data-testid': `start-job-${service.service_id}`,
            onclick: () => onStartWizard(service),
          },
          'New prediction',
        ),
        el(
          'button',
          {
            class: 'ghost',
            'data-testid': `show-coverage-${service.service_id}`,
            onclick: async () => {
              const report = await state.api.coverage(service.service_id)
              clear(detail).append(coverageGrid(report))
            },
          },
          'Coverage grid',
        ),
      ),
      detail,
    )
    list.append(card)
  }
  return view
}
