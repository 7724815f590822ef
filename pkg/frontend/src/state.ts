/**
 * In-memory application state. Nothing clinical is persisted client-side;
 * closing the tab forgets everything except the bearer token lifetime on
 * the server.
 */

import { Account, ApiClient, PlatformInfo, RuntimeConfig, ServiceSummary } from './api.js'

export type Route =
  | 'login'
  | 'catalog'
  | 'wizard'
  | 'jobs'
  | 'review'
  | 'audit'
  | 'admin'

export interface AppState {
  api: ApiClient
  config: RuntimeConfig
  platform: PlatformInfo | null
  account: Account | null
  route: Route
  services: ServiceSummary[]
  /** Service the user is currently working with (wizard, Alf, banner). */
  activeService: ServiceSummary | null
  /** Client-side only: services acknowledged this session (UI dedupe). */
  acknowledged: Set<string>
  /** Client-side only: Alf snooze flags, never sent to the server. */
  alfSnoozed: Set<string>
}

export function initialState(config: RuntimeConfig, api?: ApiClient): AppState {
  return {
    api: api ?? new ApiClient(config.apiBaseUrl),
    config,
    platform: null,
    account: null,
    route: 'login',
    services: [],
    activeService: null,
    acknowledged: new Set(),
    alfSnoozed: new Set(),
  }
}

export async function loadRuntimeConfig(url = 'config.json'): Promise<RuntimeConfig> {
  const response = await fetch(url)
  if (!response.ok) throw new Error(`cannot load runtime config from ${url}`)
  return (await response.json()) as RuntimeConfig
}
