/**
 * End-to-end console tests against a seeded live backend.
 *
 * Covers the acceptance surface of the console: banner persistence on
 * uncertified services, double-check dialog gating, one full Alf SUS
 * round-trip producing a scorable response, the attribution chart for a
 * stub job, and the correspondence between UI transitions and the audit
 * trail.
 */

import { afterAll, beforeAll, beforeEach, describe, expect, it } from 'vitest'

import { ApiClient } from '../src/api.js'
import {
  Backend,
  click,
  loginAs,
  makeApp,
  query,
  queryAll,
  setValue,
  startBackend,
  until,
} from './helpers.js'

let backend: Backend

beforeAll(async () => {
  backend = await startBackend()
})

afterAll(() => {
  backend.stop()
})

const CLEAN_CASE = {
  age: '74',
  barthel_index: '80',
  charlson_index: '2',
  creatinine: '1.0',
  albumin: '3.8',
}

async function fillCaseForm(pseudoId: string, values: Record<string, string> = CLEAN_CASE) {
  await until(() => document.querySelector('[data-testid="case-form"]') !== null, 10_000, 'case form')
  setValue('[data-testid="case-pseudo-id"]', pseudoId)
  for (const [name, value] of Object.entries(values)) {
    setValue(`[data-testid="case-${name}"]`, value)
  }
}

describe('academic banner', () => {
  it('persists across every wizard step of an uncertified service and cannot be dismissed', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'clinician')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.uncertified) ?? null
    app.navigate('wizard')

    // Step 1: case form. Banner present, no dismiss control anywhere.
    await fillCaseForm('px-banner-1')
    expect(query('[data-testid="academic-banner"]').textContent).toContain(
      'Only for academic purposes',
    )
    expect(document.querySelector('[data-testid="academic-banner"] .dismiss')).toBeNull()

    // The mode selector never offers what the API would refuse: an
    // uncertified service cannot be used clinically.
    const modeOptions = queryAll<HTMLOptionElement>('[data-testid="mode-select"] option').map(
      (option) => option.value,
    )
    expect(modeOptions).toEqual(['academic'])

    // Acknowledge the conditions of use through the banner (one POST).
    click('[data-testid="banner-ack"]')
    await until(
      () => query<HTMLButtonElement>('[data-testid="banner-ack"]').disabled,
      5_000,
      'acknowledgement recorded',
    )

    // Step 2: double-check. Banner still present.
    click('[data-testid="case-submit"]')
    await until(
      () => document.querySelector('[data-testid="double-check-dialog"]') !== null,
      10_000,
      'double-check dialog',
    )
    expect(document.querySelector('[data-testid="academic-banner"]')).not.toBeNull()

    // Step 3: result. Banner still present.
    query<HTMLDetailsElement>('[data-testid="limitations-details"]').open = true
    query('[data-testid="limitations-details"]').dispatchEvent(new Event('toggle'))
    await until(
      () => !query<HTMLButtonElement>('[data-testid="double-check-confirm"]').disabled,
      5_000,
      'confirm enabled',
    )
    click('[data-testid="double-check-confirm"]')
    await until(
      () => document.querySelector('[data-testid="wizard-step-result"]') !== null,
      20_000,
      'result step',
    )
    expect(document.querySelector('[data-testid="academic-banner"]')).not.toBeNull()
  })

  it('does not appear for a certified service in clinical mode', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'clinician')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.certified) ?? null
    app.navigate('wizard')
    await fillCaseForm('px-banner-2')
    expect(document.querySelector('[data-testid="academic-banner"]')).toBeNull()
    const modeOptions = queryAll<HTMLOptionElement>('[data-testid="mode-select"] option').map(
      (option) => option.value,
    )
    expect(modeOptions).toEqual(['clinical', 'academic'])
  })
})

describe('double-check dialog', () => {
  it('keeps confirm disabled until the limitations are expanded', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'clinician')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.certified) ?? null
    app.navigate('wizard')
    await fillCaseForm('px-gate-1')
    click('[data-testid="case-submit"]')
    await until(
      () => document.querySelector('[data-testid="double-check-dialog"]') !== null,
      10_000,
      'double-check dialog',
    )

    // Purpose, limitations, and the quality report are all on screen.
    const dialog = query('[data-testid="double-check-dialog"]')
    expect(dialog.textContent).toContain('Prediction of one-year survival')
    expect(dialog.textContent).toContain('Data quality: pass')
    expect(dialog.querySelector('[data-testid="limitations-details"]')).not.toBeNull()

    // Gated: disabled before the limitations are opened, enabled after.
    const confirm = query<HTMLButtonElement>('[data-testid="double-check-confirm"]')
    expect(confirm.disabled).toBe(true)
    const details = query<HTMLDetailsElement>('[data-testid="limitations-details"]')
    details.open = true
    details.dispatchEvent(new Event('toggle'))
    await until(() => !confirm.disabled, 5_000, 'confirm enabled after expansion')

    click('[data-testid="double-check-confirm"]')
    await until(
      () => document.querySelector('[data-testid="wizard-step-result"]') !== null,
      20_000,
      'result step',
    )
  })

  it('shows a blocked step instead of a confirm control when quality blocks', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'clinician')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.certified) ?? null
    app.navigate('wizard')
    const incomplete = { ...CLEAN_CASE }
    delete (incomplete as Record<string, string>).albumin
    await fillCaseForm('px-gate-2', incomplete)
    click('[data-testid="case-submit"]')
    await until(
      () => document.querySelector('[data-testid="wizard-step-blocked"]') !== null,
      10_000,
      'blocked step',
    )
    // No confirm control exists for a blocked draft.
    expect(document.querySelector('[data-testid="double-check-confirm"]')).toBeNull()
    expect(query('[data-testid="hard-failures"]').textContent).toContain('albumin')
  })
})

describe('Alf', () => {
  it('completes one SUS round-trip that the backend can score', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'researcher')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.certified) ?? null
    app.render()

    const appeared = await app.alf.check(backend.services.certified)
    expect(appeared).toBe(true)

    // Answer all ten items, one at a time, through the widget.
    for (let item = 0; item < 10; item++) {
      await until(
        () =>
          document.querySelector('[data-testid="alf-question"]')?.textContent?.startsWith(
            `${item + 1}/10`,
          ) ?? false,
        5_000,
        `question ${item + 1}`,
      )
      click(`[data-testid="alf-answer-${item % 2 === 0 ? 4 : 2}"]`)
    }
    await until(
      () => document.querySelector('[data-testid="alf-thanks"]') !== null,
      10_000,
      'thanks bubble',
    )

    // The response is complete and scorable: aggregation yields a SUS mean.
    const admin = new ApiClient(backend.baseUrl)
    const adminLogin = await admin.login(
      backend.credentials.admin.user_id,
      backend.credentials.admin.secret,
    )
    admin.token = adminLogin.token
    const response = await fetch(
      `${backend.baseUrl}/services/${backend.services.certified}/usability/aggregate`,
      { method: 'POST', headers: { authorization: `Bearer ${admin.token}` } },
    )
    expect(response.status).toBe(201)
    const { scores } = (await response.json()) as {
      scores: { instrument: string; n: number; value: number }[]
    }
    const sus = scores.find((score) => score.instrument === 'SUS')
    expect(sus).toBeDefined()
    expect(sus!.n).toBeGreaterThanOrEqual(1)
    expect(sus!.value).toBeGreaterThanOrEqual(0)
    expect(sus!.value).toBeLessThanOrEqual(100)
  })

  it('never shows more than one open prompt and honours snooze locally', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'clinician')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.uncertified) ?? null
    app.render()
    const first = await app.alf.check(backend.services.uncertified)
    expect(first).toBe(true)
    click('[data-testid="alf-snooze"]')
    // Snoozed client-side: the widget stays quiet without a server call.
    const second = await app.alf.check(backend.services.uncertified)
    expect(second).toBe(false)
  })
})

describe('attribution chart', () => {
  it('renders signed bars for every stub feature with annotations', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'clinician')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.certified) ?? null
    app.navigate('wizard')
    await fillCaseForm('px-chart-1', {
      ...CLEAN_CASE,
      charlson_index: '6',
      albumin: '2.2',
    })
    click('[data-testid="case-submit"]')
    await until(
      () => document.querySelector('[data-testid="double-check-dialog"]') !== null,
      10_000,
      'double-check dialog',
    )
    const details = query<HTMLDetailsElement>('[data-testid="limitations-details"]')
    details.open = true
    details.dispatchEvent(new Event('toggle'))
    click('[data-testid="double-check-confirm"]')
    await until(
      () => document.querySelector('[data-testid="attribution-chart"]') !== null,
      20_000,
      'attribution chart',
    )

    const chart = query<SVGSVGElement>('[data-testid="attribution-chart"]')
    expect(chart.getAttribute('data-method')).toBe('exact_shapley')
    const bars = Array.from(chart.querySelectorAll('rect.bar'))
    const features = bars.map((bar) => bar.getAttribute('data-feature'))
    expect(new Set(features)).toEqual(
      new Set(['age', 'barthel_index', 'charlson_index', 'creatinine', 'albumin']),
    )
    // A degraded case pushes survival down: at least one negative bar.
    const values = bars.map((bar) => Number(bar.getAttribute('data-value')))
    expect(values.some((value) => value < 0)).toBe(true)
    expect(query('[data-testid="attribution-annotation"]').textContent).toContain('baseline')
    expect(query('[data-testid="attribution-annotation"]').textContent).toContain('prediction')
  })
})

describe('audit correspondence', () => {
  it('records every UI state transition in the trail', async () => {
    const { app, state } = makeApp(backend)
    await loginAs(app, backend, 'clinician')
    state.activeService =
      state.services.find((s) => s.service_id === backend.services.certified) ?? null
    app.navigate('wizard')
    await fillCaseForm('px-audit-1')
    click('[data-testid="case-submit"]')
    await until(
      () => document.querySelector('[data-testid="double-check-dialog"]') !== null,
      10_000,
      'double-check dialog',
    )
    const details = query<HTMLDetailsElement>('[data-testid="limitations-details"]')
    details.open = true
    details.dispatchEvent(new Event('toggle'))
    click('[data-testid="double-check-confirm"]')
    await until(
      () => document.querySelector('[data-testid="wizard-step-result"]') !== null,
      20_000,
      'result step',
    )
    click('[data-testid="ground-truth-1"]')
    await until(
      () => query('[data-testid="truth-status"]').textContent!.length > 0,
      10_000,
      'ground truth recorded',
    )

    // Auditor view: the wizard's transitions all left audit records.
    const auditor = new ApiClient(backend.baseUrl)
    const login = await auditor.login(
      backend.credentials.auditor.user_id,
      backend.credentials.auditor.secret,
    )
    auditor.token = login.token
    const { records } = await auditor.auditQuery({
      user: backend.credentials.clinician.user_id,
      limit: 1000,
    })
    const actions = records.map((record) => record.action)
    for (const expected of [
      'case_ingested',
      'job_created',
      'regulation_checked',
      'job_confirmed',
      'job_executed',
      'ground_truth_submitted',
      'job_closed',
    ]) {
      expect(actions).toContain(expected)
    }
  })
})
