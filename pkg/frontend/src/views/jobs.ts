/** The user's jobs: states, outputs, and ground-truth entry. */

import { JobDoc } from '../api.js'
import { clear, el, fmt } from '../dom.js'
import { AppState } from '../state.js'

export function renderJobs(state: AppState): HTMLElement {
  const view = el('section', { class: 'view view-jobs' }, el('h2', {}, 'My prediction jobs'))
  const table = el('table', { class: 'jobs-table', 'data-testid': 'jobs-table' })
  view.append(table)

  const reload = async () => {
    const { jobs } = await state.api.listJobs()
    clear(table).append(
      el(
        'tr',
        {},
        el('th', {}, 'job'),
        el('th', {}, 'service'),
        el('th', {}, 'mode'),
        el('th', {}, 'state'),
        el('th', {}, 'outputs'),
        el('th', {}, 'ground truth'),
      ),
    )
    for (const job of jobs) {
      table.append(renderRow(job))
    }
  }

  const renderRow = (job: JobDoc): HTMLElement => {
    const truthCell = el('td', {})
    if (job.state === 'executed') {
      truthCell.append(
        ...[1, 0].map((outcome) =>
          el(
            'button',
            {
              class: 'ghost',
              onclick: async () => {
                await state.api.submitGroundTruth(job.job_id, outcome)
                await reload()
              },
            },
            String(outcome),
          ),
        ),
      )
    } else {
      truthCell.textContent = job.ground_truth_ref ? 'recorded' : '-'
    }
    return el(
      'tr',
      { 'data-job': job.job_id, class: job.blocked ? 'blocked' : '' },
      el('td', {}, job.job_id.slice(0, 8)),
      el('td', {}, job.service_id),
      el('td', {}, job.mode),
      el('td', {}, job.blocked ? `${job.state} (blocked)` : job.state),
      el(
        'td',
        {},
        Object.entries(job.outputs)
          .map(([name, value]) => `${name.split('_')[2] ?? name}=${fmt(value, 2)}`)
          .join(' '),
      ),
      truthCell,
    )
  }

  void reload()
  return view
}
