// The only global keyboard handlers the client installs.

export const KEYMAP = {
  submit: "Enter",
  undo: "z",
  nextTask: "n",
} as const;

export type KeyAction = keyof typeof KEYMAP;

export function actionForKey(key: string): KeyAction | null {
  for (const [action, bound] of Object.entries(KEYMAP)) {
    if (bound === key) return action as KeyAction;
  }
  return null;
}
