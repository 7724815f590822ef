/** Audit browser for auditors and admins; read-only. */

import { clear, el } from '../dom.js'
import { AppState } from '../state.js'

export function renderAudit(state: AppState): HTMLElement {
  const view = el('section', { class: 'view view-audit' }, el('h2', {}, 'Audit trail'))
  const userFilter = el('input', { name: 'user', placeholder: 'user id', 'data-testid': 'audit-filter-user' }) as HTMLInputElement
  const actionFilter = el('input', { name: 'action', placeholder: 'action', 'data-testid': 'audit-filter-action' }) as HTMLInputElement
  const table = el('table', { class: 'audit-table', 'data-testid': 'audit-table' })
  const status = el('p', { class: 'meta', 'data-testid': 'audit-status' })

  const reload = async () => {
    const params: Record<string, string | number> = { limit: 200 }
    if (userFilter.value) params.user = userFilter.value
    if (actionFilter.value) params.action = actionFilter.value
    const { records, total } = await state.api.auditQuery(params)
    status.textContent = `${records.length} of ${total} records`
    clear(table).append(
      el(
        'tr',
        {},
        el('th', {}, 'seq'),
        el('th', {}, 'timestamp'),
        el('th', {}, 'user'),
        el('th', {}, 'action'),
        el('th', {}, 'service'),
        el('th', {}, 'record hash'),
      ),
    )
    for (const record of records) {
      table.append(
        el(
          'tr',
          { 'data-action': record.action },
          el('td', {}, String(record.seq)),
          el('td', {}, record.timestamp),
          el('td', {}, record.user_id),
          el('td', {}, record.action),
          el('td', {}, record.service_id ?? ''),
          el('td', { class: 'hash' }, record.record_hash.slice(0, 16)),
        ),
      )
    }
  }

  view.append(
    el(
      'form',
      {
        class: 'audit-filters',
        onsubmit: (event: Event) => {
          event.preventDefault()
          void reload()
        },
      },
      userFilter,
      actionFilter,
      el('button', { type: 'submit', 'data-testid': 'audit-reload' }, 'Filter'),
    ),
    status,
    table,
  )
  void reload()
  return view
}
