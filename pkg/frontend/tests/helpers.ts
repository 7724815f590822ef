/** Boots the seeded Python backend and drives the console against it. */

import { spawn, ChildProcess } from 'node:child_process'
import { createServer } from 'node:net'
import path from 'node:path'

import { ApiClient } from '../src/api.js'
import { AppState, initialState } from '../src/state.js'
import { ConsoleApp } from '../src/main.js'

export interface Backend {
  baseUrl: string
  credentials: Record<string, { user_id: string; secret: string; role: string }>
  services: { certified: string; uncertified: string }
  stop(): void
}

const REPO_ROOT = path.resolve(__dirname, '..', '..')

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const server = createServer()
    server.listen(0, '127.0.0.1', () => {
      const address = server.address()
      if (address && typeof address === 'object') {
        const port = address.port
        server.close(() => resolve(port))
      } else {
        reject(new Error('no port'))
      }
    })
  })
}

export async function startBackend(): Promise<Backend> {
  const port = await freePort()
  const child: ChildProcess = spawn(
    'python3',
    ['scripts/run_demo_server.py', '--port', String(port)],
    { cwd: REPO_ROOT, stdio: ['ignore', 'pipe', 'pipe'] },
  )
  let stdout = ''
  child.stdout?.on('data', (chunk) => (stdout += String(chunk)))
  let stderr = ''
  child.stderr?.on('data', (chunk) => (stderr += String(chunk)))

  const baseUrl = `http://127.0.0.1:${port}`
  const deadline = Date.now() + 30_000
  for (;;) {
    try {
      const response = await fetch(`${baseUrl}/config`)
      if (response.ok) break
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) {
      child.kill()
      throw new Error(`backend did not start: ${stderr}\n${stdout}`)
    }
    await new Promise((resolve) => setTimeout(resolve, 150))
  }
  const seeded = JSON.parse(stdout.slice(stdout.indexOf('{')))
  return {
    baseUrl,
    credentials: seeded.users,
    services: seeded.services,
    stop: () => child.kill(),
  }
}

export function makeApp(backend: Backend): { app: ConsoleApp; state: AppState } {
  document.body.innerHTML = '<div id="app"></div>'
  const root = document.getElementById('app') as HTMLElement
  const state = initialState(
    { apiBaseUrl: backend.baseUrl, branding: 'aegis console (test)' },
    new ApiClient(backend.baseUrl),
  )
  const app = new ConsoleApp(state, root)
  return { app, state }
}

export async function loginAs(
  app: ConsoleApp,
  backend: Backend,
  role: string,
): Promise<void> {
  const user = backend.credentials[role]
  const result = await app.state.api.login(user.user_id, user.secret)
  app.state.api.token = result.token
  app.state.account = result.account
  await app.refreshServices()
}

/** Wait until the predicate holds; views render asynchronously. */
export async function until(
  predicate: () => boolean,
  timeoutMs = 10_000,
  label = 'condition',
): Promise<void> {
  const deadline = Date.now() + timeoutMs
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${label}`)
    await new Promise((resolve) => setTimeout(resolve, 25))
  }
}

export function query<T extends Element = HTMLElement>(selector: string): T {
  const node = document.querySelector<T>(selector)
  if (!node) throw new Error(`missing element ${selector}`)
  return node
}

export function queryAll<T extends Element = HTMLElement>(selector: string): T[] {
  return Array.from(document.querySelectorAll<T>(selector))
}

export function click(selector: string): void {
  query<HTMLElement>(selector).click()
}

export function setValue(selector: string, value: string): void {
  const input = query<HTMLInputElement>(selector)
  input.value = value
}
