/**
 * Alf, the corner survey chat. Redeems a usability prompt token, walks
 * through the questionnaire one item at a time, and posts one complete
 * response. Snoozing is purely client-side state.
 */

import { ApiClient, SusItems, UeqsItems } from '../api.js'
import { clear, el } from '../dom.js'
import { AppState } from '../state.js'

type Instrument = 'SUS' | 'UEQ_S'

export class AlfWidget {
  readonly root: HTMLElement
  private answers: number[] = []
  private items: string[] = []
  private scaleMax = 5
  private instrument: Instrument = 'SUS'
  private promptToken: string | null = null
  private serviceId: string | null = null

  constructor(
    private readonly state: AppState,
    private readonly onSubmitted?: (responseId: string) => void,
  ) {
    this.root = el('div', { class: 'alf-widget', 'data-testid': 'alf-widget' })
  }

  /** Ask the server whether this user is due a questionnaire. */
  async check(serviceId: string, instrument: Instrument = 'SUS'): Promise<boolean> {
    if (this.state.alfSnoozed.has(serviceId)) return false
    const { prompt } = await this.state.api.usabilityPrompt(serviceId)
    if (!prompt) {
      clear(this.root)
      return false
    }
    this.serviceId = serviceId
    this.promptToken = prompt.token
    this.instrument = instrument
    if (instrument === 'SUS') {
      const payload = (await this.state.api.usabilityItems('SUS')) as SusItems
      this.items = payload.items
      this.scaleMax = payload.scale.max
    } else {
      const payload = (await this.state.api.usabilityItems('UEQ_S')) as UeqsItems
      this.items = payload.items.map((item) => `${item.left} ... ${item.right}`)
      this.scaleMax = payload.scale.max
    }
    this.answers = []
    this.renderItem()
    return true
  }

  private renderItem(): void {
    clear(this.root)
    const index = this.answers.length
    const bubble = el('div', { class: 'alf-bubble' })
    bubble.append(
      el('div', { class: 'alf-header' }, 'Alf', el('span', { class: 'alf-sub' }, ' quick check-in')),
    )
    if (index >= this.items.length) {
      void this.submit(bubble)
      this.root.append(bubble)
      return
    }
    bubble.append(
      el(
        'p',
        { class: 'alf-question', 'data-testid': 'alf-question' },
        `${index + 1}/${this.items.length}: ${this.items[index]}`,
      ),
    )
    const row = el('div', { class: 'alf-answers' })
    for (let value = 1; value <= this.scaleMax; value++) {
      row.append(
        el(
          'button',
          {
            class: 'alf-answer',
            'data-testid': `alf-answer-${value}`,
            onclick: () => {
              this.answers.push(value)
              this.renderItem()
            },
          },
          String(value),
        ),
      )
    }
    bubble.append(row)
    bubble.append(
      el(
        'button',
        {
          class: 'alf-snooze',
          'data-testid': 'alf-snooze',
          onclick: () => {
            if (this.serviceId) this.state.alfSnoozed.add(this.serviceId)
            clear(this.root)
          },
        },
        'Not now',
      ),
    )
    this.root.append(bubble)
  }

  private async submit(bubble: HTMLElement): Promise<void> {
    if (!this.serviceId) return
    const result = await this.state.api.submitUsability(
      this.serviceId,
      this.instrument,
      this.answers,
      this.promptToken ?? undefined,
    )
    bubble.append(
      el(
        'p',
        { class: 'alf-thanks', 'data-testid': 'alf-thanks' },
        'Thanks, that helps keep the tools honest.',
      ),
    )
    this.onSubmitted?.(result.response_id)
  }
}
