/**
 * Click-to-boldface word selection. The selection state is the single
 * source of truth; the submitted label vector is read straight from it, so
 * the payload always mirrors what is on screen.
 */

export class WordSelection {
  private readonly selected: boolean[];

  constructor(readonly tokens: string[]) {
    this.selected = tokens.map(() => false);
  }

  /** Flip one word; returns the new state. Toggling twice is a no-op. */
  toggle(index: number): boolean {
    if (index < 0 || index >= this.selected.length) {
      throw new RangeError(`word index ${index} out of range`);
    }
    this.selected[index] = !this.selected[index];
    return this.selected[index];
  }

  isSelected(index: number): boolean {
    return this.selected[index];
  }

  /** Binary emphasis vector, one entry per rendered word. */
  vector(): number[] {
    return this.selected.map((on) => (on ? 1 : 0));
  }

  get selectedCount(): number {
    return this.selected.filter(Boolean).length;
  }
}
