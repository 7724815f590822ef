/**
 * Typed client for the gateway HTTP API. All governance decisions live on
 * the server; this client only carries payloads and surfaces refusals.
 */

export interface RuntimeConfig {
  apiBaseUrl: string
  branding?: string
}

export interface PlatformInfo {
  disclaimer_text: string
  jurisdiction: string
  decision_threshold: number
}

export interface Account {
  user_id: string
  display_name: string
  organisation: string
  role: 'clinician' | 'researcher' | 'auditor' | 'admin'
  active: boolean
}

export interface LoginResult {
  token: string
  expires_at: string
  account: Account
}

export interface CertificationDoc {
  record_id: string
  scheme: string
  certificate_number: string
  jurisdictions: string[]
  valid_from: string
  valid_to: string
}

export interface ServiceSummary {
  service_id: string
  version: number
  purpose: string
  intended_context: string
  manufacturer: string
  declared_limitations: string[]
  certified_for_clinical_use: boolean
  certifications: CertificationDoc[]
}

export interface VariableSpecDoc {
  name: string
  value_type: 'numeric' | 'categorical' | 'boolean' | 'datetime'
  unit?: string
  valid_range?: [number, number]
  categories?: string[]
  required: boolean
}

export interface PassportDoc {
  service_id: string
  version: number
  purpose: string
  intended_context: string
  manufacturer: string
  declared_limitations: string[]
  input_schema: VariableSpecDoc[]
  output_schema: VariableSpecDoc[]
  evaluation_history: string[]
  training_descriptor: {
    dataset_name: string
    population: string
    case_count: number
    demographic_attributes_present: string[]
    known_absent_attributes: string[]
  }
}

export interface CoverageRow {
  risk: number
  label: string
  mitigating_requirements: string[]
  enabled: string[]
  gaps: string[]
  covered: boolean
}

export interface CoverageReport {
  service_id: string
  enabled_requirements: string[]
  risks: CoverageRow[]
}

export interface RegulationDecision {
  clinical_allowed: boolean
  disclaimer_required: boolean
  reasons: string[]
}

export interface QualityReportDoc {
  report_id: string
  dimension_scores: Record<string, number | null>
  hard_failures: { variable: string; check: string; detail: string }[]
  findings: string[]
  overall: number | null
  verdict: 'pass' | 'block'
}

export interface AttributionDoc {
  job_id: string | null
  method: 'exact_shapley' | 'sampled_shapley' | 'native'
  contributions: Record<string, number>
  prediction: number
  baseline_prediction: number
  baseline: Record<string, unknown>
  n_samples: number | null
  seed: number | null
  std_error: Record<string, number> | null
}

export interface JobDoc {
  job_id: string
  user_id: string
  service_id: string
  passport_version: number
  mode: 'clinical' | 'academic'
  state: 'draft' | 'confirmed' | 'executed' | 'closed'
  blocked: boolean
  block_reasons: string[]
  limitations_shown: string[]
  purpose_shown: string
  intended_context_shown: string
  outputs: Record<string, number>
  model_build_id: string | null
  ground_truth_ref: string | null
  transitions: Record<string, string>
  attribution: AttributionDoc | null
  quality_report: QualityReportDoc
}

export interface UsabilityPrompt {
  token: string
  service_id: string
  issued_at: string
}

export interface SusItems {
  instrument: 'SUS'
  scale: { min: number; max: number; labels: string[] }
  items: string[]
}

export interface UeqsItems {
  instrument: 'UEQ_S'
  scale: { min: number; max: number }
  items: { left: string; right: string; subscale: string }[]
}

export interface UsabilityScore {
  score_id: string
  instrument: string
  value: number | { pragmatic: number; hedonic: number; overall: number }
  n: number
}

export interface ReviewItemView {
  variables: Record<string, { value: unknown; unit: string | null }>
  answered: boolean
  known_outcome?: number
  model_prediction?: number
  user_estimate?: number | null
}

export interface ReviewSessionDoc {
  session_id: string
  service_id: string
  source: string
  state: 'open' | 'completed'
  items: ReviewItemView[]
  summary: { user_vs_truth: number; model_vs_truth: number; user_vs_model: number } | null
}

export interface AuditRecordDoc {
  seq: number
  timestamp: string
  user_id: string
  action: string
  service_id: string | null
  detail: Record<string, unknown>
  record_hash: string
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: { error?: string; gate?: string; reasons?: string[] },
  ) {
    super(body.error ?? `HTTP ${status}`)
  }
}

export class ApiClient {
  token: string | null = null

  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = (...args) => globalThis.fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { 'content-type': 'application/json' }
    if (this.token) headers['authorization'] = `Bearer ${this.token}`
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    })
    const text = await response.text()
    const payload = text ? JSON.parse(text) : {}
    if (!response.ok) throw new ApiError(response.status, payload)
    return payload as T
  }

  // auth
  login(userId: string, secret: string): Promise<LoginResult> {
    return this.request('POST', '/auth/login', { user_id: userId, secret })
  }
  logout(): Promise<void> {
    return this.request('POST', '/auth/logout')
  }
  me(): Promise<Account> {
    return this.request('GET', '/me')
  }
  platformInfo(): Promise<PlatformInfo> {
    return this.request('GET', '/config')
  }

  // catalog
  listServices(): Promise<{ services: ServiceSummary[] }> {
    return this.request('GET', '/services')
  }
  passport(serviceId: string, version?: number): Promise<PassportDoc> {
    const suffix = version === undefined ? '' : `?version=${version}`
    return this.request('GET', `/services/${serviceId}/passport${suffix}`)
  }
  coverage(serviceId: string): Promise<CoverageReport> {
    return this.request('GET', `/services/${serviceId}/coverage`)
  }
  regulation(serviceId: string, mode: string): Promise<RegulationDecision> {
    return this.request('GET', `/services/${serviceId}/regulation?mode=${mode}`)
  }
  acknowledgeDisclaimer(serviceId: string): Promise<unknown> {
    return this.request('POST', `/services/${serviceId}/disclaimer-ack`, {})
  }

  // jobs
  createJob(serviceId: string, document: unknown, mode: string): Promise<JobDoc> {
    return this.request('POST', '/jobs', { service_id: serviceId, document, mode })
  }
  confirmJob(jobId: string): Promise<JobDoc> {
    return this.request('POST', `/jobs/${jobId}/confirm`)
  }
  executeJob(jobId: string): Promise<JobDoc> {
    return this.request('POST', `/jobs/${jobId}/execute`)
  }
  listJobs(): Promise<{ jobs: JobDoc[] }> {
    return this.request('GET', '/jobs')
  }
  getJob(jobId: string): Promise<JobDoc> {
    return this.request('GET', `/jobs/${jobId}`)
  }
  attribution(jobId: string): Promise<AttributionDoc> {
    return this.request('GET', `/jobs/${jobId}/attribution`)
  }
  submitGroundTruth(jobId: string, outcome: number): Promise<unknown> {
    return this.request('POST', `/jobs/${jobId}/ground-truth`, { outcome })
  }

  // monitoring
  performance(serviceId: string): Promise<{ snapshots: unknown[]; alerts: unknown[] }> {
    return this.request('GET', `/services/${serviceId}/performance`)
  }

  // usability
  usabilityPrompt(serviceId: string): Promise<{ prompt: UsabilityPrompt | null }> {
    return this.request('GET', `/usability/prompt?service=${serviceId}`)
  }
  usabilityItems(instrument: 'SUS'): Promise<SusItems>
  usabilityItems(instrument: 'UEQ_S'): Promise<UeqsItems>
  usabilityItems(instrument: string): Promise<unknown> {
    return this.request('GET', `/usability/items?instrument=${instrument}`)
  }
  submitUsability(
    serviceId: string,
    instrument: string,
    answers: number[],
    promptToken?: string,
  ): Promise<{ response_id: string; complete: boolean }> {
    return this.request('POST', '/usability/responses', {
      service_id: serviceId,
      instrument,
      answers,
      prompt_token: promptToken ?? null,
    })
  }
  usabilityScores(serviceId: string): Promise<{ scores: UsabilityScore[] }> {
    return this.request('GET', `/services/${serviceId}/usability`)
  }

  // review
  createReviewSession(serviceId: string, n: number, source: string): Promise<ReviewSessionDoc> {
    return this.request('POST', '/review/sessions', { service_id: serviceId, n, source })
  }
  getReviewSession(sessionId: string): Promise<ReviewSessionDoc> {
    return this.request('GET', `/review/sessions/${sessionId}`)
  }
  recordEstimate(sessionId: string, index: number, estimate: number): Promise<ReviewItemView> {
    return this.request('POST', `/review/sessions/${sessionId}/items/${index}/estimate`, {
      estimate,
    })
  }
  completeReviewSession(sessionId: string): Promise<NonNullable<ReviewSessionDoc['summary']>> {
    return this.request('POST', `/review/sessions/${sessionId}/complete`)
  }

  // audit
  auditQuery(params: Record<string, string | number>): Promise<{ records: AuditRecordDoc[]; total: number }> {
    const query = Object.entries(params)
      .map(([key, value]) => `${key}=${encodeURIComponent(value)}`)
      .join('&')
    return this.request('GET', `/audit${query ? '?' + query : ''}`)
  }
}
