import { ApiError } from '../api.js'
import { el } from '../dom.js'
import { AppState } from '../state.js'

export function renderLogin(state: AppState, onLoggedIn: () => void): HTMLElement {
  const error = el('p', { class: 'form-error', 'data-testid': 'login-error' })
  const userInput = el('input', {
    name: 'user_id',
    'data-testid': 'login-user',
    autocomplete: 'username',
  })
  const secretInput = el('input', {
    name: 'secret',
    type: 'password',
    'data-testid': 'login-secret',
    autocomplete: 'current-password',
  })
  const form = el(
    'form',
    {
      class: 'login-form',
      onsubmit: async (event: Event) => {
        event.preventDefault()
        error.textContent = ''
        try {
          const result = await state.api.login(userInput.value, secretInput.value)
          state.api.token = result.token
          state.account = result.account
          onLoggedIn()
        } catch (err) {
          error.textContent = err instanceof ApiError ? err.message : String(err)
        }
      },
    },
    el('h2', {}, state.config.branding ?? 'aegis console'),
    el('label', {}, 'User id', userInput),
    el('label', {}, 'Secret', secretInput),
    el('button', { type: 'submit', 'data-testid': 'login-submit' }, 'Sign in'),
    error,
  )
  return el('section', { class: 'view view-login' }, form)
}
