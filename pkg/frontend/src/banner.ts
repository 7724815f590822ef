/**
 * Persistent academic-use banner.
 *
 * Whenever the active service is not certified for clinical use here, the
 * banner sits above every screen, cannot be dismissed, and offers the
 * acknowledgement action (which posts to the compliance endpoint exactly
 * once per session and service).
 */

import { el } from './dom.js'
import { AppState } from './state.js'

export function renderAcademicBanner(state: AppState): HTMLElement | null {
  const service = state.activeService
  if (!service || service.certified_for_clinical_use) return null
  const text = state.platform?.disclaimer_text ?? 'Only for academic purposes'
  const alreadyAcked = state.acknowledged.has(service.service_id)

  const ackButton = el(
    'button',
    {
      class: 'banner-ack',
      'data-testid': 'banner-ack',
      disabled: alreadyAcked,
      onclick: async (event: Event) => {
        const button = event.currentTarget as HTMLButtonElement
        if (button.disabled) return
        button.disabled = true // one POST per click path, ever
        await state.api.acknowledgeDisclaimer(service.service_id)
        state.acknowledged.add(service.service_id)
        button.textContent = 'Conditions acknowledged'
      },
    },
    alreadyAcked ? 'Conditions acknowledged' : 'Acknowledge conditions of use',
  )

  // No dismiss control by design: the warning persists on every screen.
  return el(
    'div',
    { class: 'banner-academic', role: 'alert', 'data-testid': 'academic-banner' },
    el('strong', {}, text),
    el(
      'span',
      { class: 'banner-detail' },
      ` ${service.service_id} is not certified for clinical use in this jurisdiction.`,
    ),
    ackButton,
  )
}
