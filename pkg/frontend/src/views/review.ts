/**
 * Case review sessions: estimate first, reveal afterwards. The API keeps
 * outcomes hidden for unanswered items, so there is nothing to leak here
 * even if this view misbehaved.
 */

import { ReviewSessionDoc } from '../api.js'
import { clear, el, fmt } from '../dom.js'
import { AppState } from '../state.js'

export function renderReview(state: AppState): HTMLElement {
  const view = el('section', { class: 'view view-review' }, el('h2', {}, 'Case review'))
  const stage = el('div', { class: 'review-stage' })
  view.append(stage)

  const showSetup = () => {
    const countInput = el('input', {
      name: 'n',
      type: 'number',
      value: '3',
      'data-testid': 'review-count',
    }) as HTMLInputElement
    const sourceSelect = el(
      'select',
      { name: 'source', 'data-testid': 'review-source' },
      el('option', { value: 'simulated' }, 'simulated cases'),
      el('option', { value: 'retrospective' }, 'retrospective cases'),
    ) as HTMLSelectElement
    const error = el('p', { class: 'form-error', 'data-testid': 'review-error' })
    clear(stage).append(
      el(
        'form',
        {
          class: 'review-form',
          onsubmit: async (event: Event) => {
            event.preventDefault()
            if (!state.activeService) return
            try {
              const session = await state.api.createReviewSession(
                state.activeService.service_id,
                Number(countInput.value),
                sourceSelect.value,
              )
              showSession(session)
            } catch (err) {
              error.textContent = String(err)
            }
          },
        },
        el('label', {}, 'Cases', countInput),
        el('label', {}, 'Source', sourceSelect),
        el('button', { type: 'submit', 'data-testid': 'review-start' }, 'Start session'),
        error,
      ),
    )
  }

  const showSession = (session: ReviewSessionDoc) => {
    const container = el('div', { class: 'review-session', 'data-testid': 'review-session' })
    session.items.forEach((item, index) => {
      const reveal = el('p', { class: 'review-reveal', 'data-testid': `review-reveal-${index}` })
      const answers = el(
        'div',
        { class: 'review-answers' },
        ...[1, 0].map((estimate) =>
          el(
            'button',
            {
              'data-testid': `review-item-${index}-estimate-${estimate}`,
              onclick: async (event: Event) => {
                const revealed = await state.api.recordEstimate(
                  session.session_id,
                  index,
                  estimate,
                )
                // Only after the estimate is stored does the server hand
                // over the model prediction and the known outcome.
                reveal.textContent =
                  `model: ${fmt(revealed.model_prediction ?? NaN, 2)}, ` +
                  `outcome: ${revealed.known_outcome}`
                ;(event.currentTarget as HTMLButtonElement).parentElement
                  ?.querySelectorAll('button')
                  .forEach((button) => (button.disabled = true))
              },
            },
            estimate === 1 ? 'will survive' : 'will not survive',
          ),
        ),
      )
      container.append(
        el(
          'article',
          { class: 'review-item' },
          el('h4', {}, `Case ${index + 1}`),
          el(
            'ul',
            {},
            ...Object.entries(item.variables).map(([name, reading]) =>
              el('li', {}, `${name}: ${String(reading.value)}${reading.unit ? ' ' + reading.unit : ''}`),
            ),
          ),
          answers,
          reveal,
        ),
      )
    })
    const summary = el('p', { class: 'review-summary', 'data-testid': 'review-summary' })
    container.append(
      el(
        'button',
        {
          'data-testid': 'review-complete',
          onclick: async () => {
            const report = await state.api.completeReviewSession(session.session_id)
            summary.textContent =
              `you vs truth ${fmt(report.user_vs_truth, 2)} | ` +
              `model vs truth ${fmt(report.model_vs_truth, 2)} | ` +
              `you vs model ${fmt(report.user_vs_model, 2)}`
          },
        },
        'Complete session',
      ),
      summary,
    )
    clear(stage).append(container)
  }

  showSetup()
  return view
}
