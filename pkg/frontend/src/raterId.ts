// Raters are anonymous: a random token minted once and kept in local storage.

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = 'humaneval-rater-id';

function randomToken(): string {
  const bytes = new Uint8Array(12);
  crypto.getRandomValues(bytes);
  return 'r-' + Array.from(bytes, (b) => b.toString(16).padStart(2, '0')).join('');
}

export function getRaterId(store: KeyValueStore): string {
  const existing = store.getItem(STORAGE_KEY);
  if (existing) return existing;
  const minted = randomToken();
  store.setItem(STORAGE_KEY, minted);
  return minted;
}
