/**
 * Secondary admin menu: register a service from a pasted passport file.
 * Deliberately thin; it forwards the document to the registry endpoint and
 * renders whatever validation report comes back.
 */

import { ApiError } from '../api.js'
import { el } from '../dom.js'
import { AppState } from '../state.js'

export function renderAdmin(state: AppState, onRegistered: () => void): HTMLElement {
  const result = el('pre', { class: 'admin-result', 'data-testid': 'admin-result' })
  const passportArea = el('textarea', {
    name: 'passport',
    rows: '14',
    'data-testid': 'admin-passport',
    placeholder: '{ passport.json contents }',
  }) as HTMLTextAreaElement
  const endpointInput = el('input', {
    name: 'endpoint',
    'data-testid': 'admin-endpoint',
    placeholder: 'http://models.internal:9000 or local:stub-palliative',
  }) as HTMLInputElement

  const form = el(
    'form',
    {
      class: 'admin-form',
      onsubmit: async (event: Event) => {
        event.preventDefault()
        result.textContent = ''
        try {
          const passport = JSON.parse(passportArea.value)
          const body = { passport, endpoint: endpointInput.value }
          const response = await fetch(`${state.api.baseUrl}/services`, {
            method: 'POST',
            headers: {
              'content-type': 'application/json',
              authorization: `Bearer ${state.api.token}`,
            },
            body: JSON.stringify(body),
          })
          const payload = await response.json()
          result.textContent = JSON.stringify(payload, null, 2)
          if (response.ok) onRegistered()
        } catch (error) {
          result.textContent = error instanceof ApiError ? error.message : String(error)
        }
      },
    },
    el('label', {}, 'Passport document', passportArea),
    el('label', {}, 'Adapter endpoint', endpointInput),
    el('button', { type: 'submit', 'data-testid': 'admin-register' }, 'Register service'),
  )
  return el(
    'section',
    { class: 'view view-admin' },
    el('h2', {}, 'Register a prediction service'),
    form,
    result,
  )
}
