/**
 * Application shell: navigation, the persistent academic banner, the Alf
 * widget, and view routing. The shell re-renders whole views; state lives
 * in memory only.
 */

import { ServiceSummary } from './api.js'
import { renderAcademicBanner } from './banner.js'
import { clear, el } from './dom.js'
import { AppState, Route, initialState, loadRuntimeConfig } from './state.js'
import { AlfWidget } from './widgets/alf.js'
import { renderAdmin } from './views/admin.js'
import { renderAudit } from './views/audit.js'
import { renderCatalog } from './views/catalog.js'
import { renderJobs } from './views/jobs.js'
import { renderLogin } from './views/login.js'
import { renderReview } from './views/review.js'
import { renderWizard } from './views/wizard.js'

export class ConsoleApp {
  readonly alf: AlfWidget

  constructor(
    readonly state: AppState,
    readonly root: HTMLElement,
  ) {
    this.alf = new AlfWidget(state)
  }

  async start(): Promise<void> {
    this.state.platform = await this.state.api.platformInfo()
    this.render()
  }

  async refreshServices(): Promise<void> {
    const { services } = await this.state.api.listServices()
    this.state.services = services
    if (this.state.activeService) {
      this.state.activeService =
        services.find((s) => s.service_id === this.state.activeService?.service_id) ?? null
    }
  }

  navigate(route: Route): void {
    this.state.route = route
    this.render()
  }

  private navButton(route: Route, label: string): HTMLElement {
    return el(
      'button',
      {
        class: this.state.route === route ? 'nav active' : 'nav',
        'data-testid': `nav-${route}`,
        onclick: () => this.navigate(route),
      },
      label,
    )
  }

  private header(): HTMLElement {
    const account = this.state.account
    const nav = el('nav', { class: 'top-nav' })
    if (account) {
      nav.append(this.navButton('catalog', 'Catalog'))
      nav.append(this.navButton('jobs', 'My jobs'))
      if (account.role === 'clinician' || account.role === 'researcher') {
        nav.append(this.navButton('review', 'Review'))
      }
      if (account.role === 'auditor' || account.role === 'admin') {
        nav.append(this.navButton('audit', 'Audit'))
      }
      if (account.role === 'admin') {
        nav.append(this.navButton('admin', 'Services'))
      }
      nav.append(
        el(
          'button',
          {
            class: 'nav logout',
            'data-testid': 'nav-logout',
            onclick: async () => {
              await this.state.api.logout()
              this.state.api.token = null
              this.state.account = null
              this.navigate('login')
            },
          },
          `Sign out (${account.user_id})`,
        ),
      )
    }
    return el(
      'header',
      { class: 'shell-header' },
      el('h1', {}, this.state.config.branding ?? 'aegis'),
      nav,
    )
  }

  render(): void {
    clear(this.root)
    this.root.append(this.header())
    // The banner persists across every screen of an uncertified service.
    const banner = renderAcademicBanner(this.state)
    if (banner) this.root.append(banner)

    const main = el('main', { class: 'shell-main' })
    this.root.append(main)
    switch (this.state.route) {
      case 'login':
        main.append(
          renderLogin(this.state, async () => {
            await this.refreshServices()
            this.navigate('catalog')
          }),
        )
        break
      case 'catalog':
        main.append(
          renderCatalog(this.state, (service: ServiceSummary) => {
            this.state.activeService = service
            this.navigate('wizard')
          }),
        )
        break
      case 'wizard':
        if (this.state.activeService) {
          main.append(
            renderWizard(this.state, this.state.activeService, {
              onFinished: () => void this.checkAlf(),
            }),
          )
        }
        break
      case 'jobs':
        main.append(renderJobs(this.state))
        break
      case 'review':
        main.append(renderReview(this.state))
        break
      case 'audit':
        main.append(renderAudit(this.state))
        break
      case 'admin':
        main.append(renderAdmin(this.state, () => void this.refreshServices()))
        break
    }
    this.root.append(this.alf.root)
  }

  async checkAlf(): Promise<void> {
    if (this.state.activeService && this.state.account) {
      await this.alf.check(this.state.activeService.service_id)
    }
  }
}

export async function bootstrap(rootId = 'app'): Promise<ConsoleApp> {
  const root = document.getElementById(rootId)
  if (!root) throw new Error(`missing #${rootId}`)
  const config = await loadRuntimeConfig()
  const app = new ConsoleApp(initialState(config), root)
  await app.start()
  return app
}

declare global {
  interface Window {
    aegisConsole?: ConsoleApp
  }
}

if (typeof window !== 'undefined' && document.getElementById('app')) {
  void bootstrap().then((app) => {
    window.aegisConsole = app
  })
}
