/**
 * The prediction wizard: case form -> quality feedback -> double-check
 * dialog -> result with the attribution chart.
 *
 * Every gating state is derived from API flags (job.blocked, certification
 * status, refusal responses); the console never re-implements governance
 * rules, it only refuses to enable what the API would refuse.
 */

import { ApiError, JobDoc, PassportDoc, ServiceSummary, VariableSpecDoc } from '../api.js'
import { renderAttributionChart } from '../charts/attribution.js'
import { clear, el, fmt } from '../dom.js'
import { AppState } from '../state.js'

export interface WizardCallbacks {
  onFinished?: (job: JobDoc) => void
}

function fieldFor(spec: VariableSpecDoc): HTMLElement {
  const hint =
    spec.value_type === 'numeric'
      ? ` (${spec.unit}, ${spec.valid_range?.[0]}..${spec.valid_range?.[1]})`
      : spec.value_type === 'categorical'
        ? ` (${spec.categories?.join(' | ')})`
        : ''
  let input: HTMLElement
  if (spec.value_type === 'categorical') {
    input = el(
      'select',
      { name: spec.name, 'data-testid': `case-${spec.name}` },
      ...(spec.categories ?? []).map((option) => el('option', { value: option }, option)),
    )
  } else {
    input = el('input', {
      name: spec.name,
      'data-testid': `case-${spec.name}`,
      type: spec.value_type === 'numeric' ? 'number' : 'text',
      step: 'any',
    })
  }
  return el('label', { class: 'case-field' }, `${spec.name}${hint}`, input)
}

function readCaseForm(form: HTMLFormElement, schema: VariableSpecDoc[]): Record<string, unknown> {
  const variables: Record<string, unknown> = {}
  for (const spec of schema) {
    const input = form.querySelector<HTMLInputElement | HTMLSelectElement>(`[name="${spec.name}"]`)
    if (!input || input.value === '') continue
    variables[spec.name] =
      spec.value_type === 'numeric' ? Number(input.value) : input.value
  }
  return variables
}

function qualityPanel(job: JobDoc): HTMLElement {
  const report = job.quality_report
  const panel = el(
    'div',
    { class: 'quality-panel', 'data-testid': 'quality-panel' },
    el('h4', {}, `Data quality: ${report.verdict}`),
  )
  const scores = el('ul', { class: 'quality-scores' })
  for (const [dimension, score] of Object.entries(report.dimension_scores)) {
    scores.append(
      el('li', {}, `${dimension}: ${score === null ? 'not applicable' : fmt(score, 2)}`),
    )
  }
  panel.append(scores)
  if (report.hard_failures.length > 0) {
    panel.append(
      el(
        'ul',
        { class: 'hard-failures', 'data-testid': 'hard-failures' },
        ...report.hard_failures.map((failure) =>
          el('li', {}, `${failure.variable}: ${failure.check} (${failure.detail})`),
        ),
      ),
    )
  }
  return panel
}

/**
 * The clinician's double-check. The confirm control stays disabled until
 * the limitations section has been expanded; confirming posts to the API
 * and any refusal is rendered verbatim.
 */
export function doubleCheckDialog(
  state: AppState,
  job: JobDoc,
  onConfirmed: (confirmed: JobDoc) => void,
  onCancel: () => void,
): HTMLElement {
  const refusal = el('p', { class: 'form-error', 'data-testid': 'confirm-refusal' })
  const confirmButton = el(
    'button',
    {
      class: 'confirm',
      'data-testid': 'double-check-confirm',
      disabled: true,
      onclick: async () => {
        refusal.textContent = ''
        try {
          onConfirmed(await state.api.confirmJob(job.job_id))
        } catch (error) {
          if (error instanceof ApiError) {
            const reasons = error.body.reasons?.join('; ') ?? error.message
            refusal.textContent = `${error.body.gate ?? 'refused'}: ${reasons}`
          } else {
            refusal.textContent = String(error)
          }
        }
      },
    },
    'I understand the limitations; run the prediction',
  ) as HTMLButtonElement

  const limitations = el(
    'details',
    {
      class: 'limitations-details',
      'data-testid': 'limitations-details',
      ontoggle: (event: Event) => {
        if ((event.currentTarget as HTMLDetailsElement).open) confirmButton.disabled = false
      },
    },
    el('summary', {}, 'Declared limitations and biases (read before confirming)'),
    el(
      'ul',
      {},
      ...(job.limitations_shown.length
        ? job.limitations_shown.map((text) => el('li', {}, text))
        : [el('li', {}, 'No limitations declared by the manufacturer.')]),
    ),
  )

  return el(
    'div',
    { class: 'double-check-dialog', role: 'dialog', 'data-testid': 'double-check-dialog' },
    el('h3', {}, 'Double-check before sending'),
    el('p', { class: 'purpose' }, job.purpose_shown),
    el('p', { class: 'meta' }, `intended context: ${job.intended_context_shown} | passport v${job.passport_version} | mode: ${job.mode}`),
    qualityPanel(job),
    limitations,
    el(
      'div',
      { class: 'dialog-actions' },
      confirmButton,
      el('button', { class: 'ghost', 'data-testid': 'double-check-cancel', onclick: onCancel }, 'Cancel'),
    ),
    refusal,
  )
}

export function renderWizard(
  state: AppState,
  service: ServiceSummary,
  callbacks: WizardCallbacks = {},
): HTMLElement {
  const view = el('section', { class: 'view view-wizard', 'data-testid': 'wizard' })
  const stage = el('div', { class: 'wizard-stage' })
  view.append(el('h2', {}, `New prediction: ${service.service_id}`), stage)

  const showResult = async (job: JobDoc) => {
    const chart = job.attribution ? renderAttributionChart(job.attribution) : null
    const truthStatus = el('p', { class: 'truth-status', 'data-testid': 'truth-status' })
    const outcomeButtons = el(
      'div',
      { class: 'truth-actions' },
      'Record the observed outcome when known:',
      ...[1, 0].map((outcome) =>
        el(
          'button',
          {
            class: 'ghost',
            'data-testid': `ground-truth-${outcome}`,
            onclick: async () => {
              await state.api.submitGroundTruth(job.job_id, outcome)
              truthStatus.textContent = 'Outcome recorded; the job is closed.'
            },
          },
          outcome === 1 ? 'Outcome reached' : 'Outcome not reached',
        ),
      ),
    )
    clear(stage).append(
      el('h3', { 'data-testid': 'wizard-step-result' }, 'Prediction'),
      el(
        'ul',
        { class: 'outputs', 'data-testid': 'outputs' },
        ...Object.entries(job.outputs).map(([name, value]) =>
          el('li', {}, `${name}: ${fmt(value)}`),
        ),
      ),
      el('p', { class: 'meta' }, `model build ${job.model_build_id}`),
      chart ?? el('p', {}, 'No attribution available.'),
      outcomeButtons,
      truthStatus,
    )
    callbacks.onFinished?.(job)
  }

  const showDoubleCheck = (job: JobDoc) => {
    clear(stage).append(
      doubleCheckDialog(
        state,
        job,
        async (confirmed) => {
          clear(stage).append(el('p', { 'data-testid': 'executing' }, 'Calling the model...'))
          const executed = await state.api.executeJob(confirmed.job_id)
          await showResult(executed)
        },
        () => showCaseForm(),
      ),
    )
  }

  const showBlocked = (job: JobDoc) => {
    clear(stage).append(
      el('h3', { 'data-testid': 'wizard-step-blocked' }, 'The predictive process is stopped'),
      qualityPanel(job),
      el('p', {}, 'Resolve the data issues and start again; this draft is kept for audit.'),
      el('button', { class: 'ghost', onclick: () => showCaseForm() }, 'Back to the case form'),
    )
  }

  const showCaseForm = async () => {
    const passport: PassportDoc = await state.api.passport(service.service_id)
    const error = el('p', { class: 'form-error', 'data-testid': 'wizard-error' })
    // The console only offers what the API would allow: clinical mode is
    // not even selectable for services without clinical certification.
    const modeSelect = el(
      'select',
      { name: 'mode', 'data-testid': 'mode-select' },
      ...(service.certified_for_clinical_use
        ? [el('option', { value: 'clinical' }, 'clinical'), el('option', { value: 'academic' }, 'academic')]
        : [el('option', { value: 'academic' }, 'academic (uncertified service)')]),
    )
    const pseudoId = el('input', {
      name: 'patient_pseudo_id',
      'data-testid': 'case-pseudo-id',
      placeholder: 'pseudonymous id',
    })
    const form = el(
      'form',
      {
        class: 'case-form',
        'data-testid': 'case-form',
        onsubmit: async (event: Event) => {
          event.preventDefault()
          error.textContent = ''
          const target = event.currentTarget as HTMLFormElement
          try {
            const document = {
              patient_pseudo_id: (pseudoId as HTMLInputElement).value,
              source_system: 'console',
              variables: readCaseForm(target, passport.input_schema),
            }
            const mode = (modeSelect as HTMLSelectElement).value
            const job = await state.api.createJob(service.service_id, document, mode)
            if (job.blocked) showBlocked(job)
            else showDoubleCheck(job)
          } catch (err) {
            error.textContent = err instanceof ApiError ? err.message : String(err)
          }
        },
      },
      el('label', { class: 'case-field' }, 'Patient pseudo-id', pseudoId),
      el('label', { class: 'case-field' }, 'Mode', modeSelect),
      ...passport.input_schema.map(fieldFor),
      el('button', { type: 'submit', 'data-testid': 'case-submit' }, 'Check quality and continue'),
      error,
    )
    clear(stage).append(el('h3', { 'data-testid': 'wizard-step-case' }, 'Clinical case'), form)
  }

  void showCaseForm()
  return view
}
