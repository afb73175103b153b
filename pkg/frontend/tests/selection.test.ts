import { describe, expect, it } from "vitest";

import { WordSelection } from "../src/selection.js";

describe("WordSelection", () => {
  it("starts with nothing selected", () => {
    const selection = new WordSelection(["a", "b", "c"]);
    expect(selection.vector()).toEqual([0, 0, 0]);
    expect(selection.selectedCount).toBe(0);
  });

  it("toggle is idempotent over pairs", () => {
    const selection = new WordSelection(["a", "b", "c"]);
    selection.toggle(1);
    expect(selection.vector()).toEqual([0, 1, 0]);
    selection.toggle(1);
    expect(selection.vector()).toEqual([0, 0, 0]);
  });

  it("mirrors an arbitrary click sequence", () => {
    const selection = new WordSelection(["w0", "w1", "w2", "w3"]);
    selection.toggle(1);
    selection.toggle(2);
    expect(selection.vector()).toEqual([0, 1, 1, 0]);
  });

  it("vector length always equals token count", () => {
    for (const n of [1, 5, 20]) {
      const selection = new WordSelection(Array.from({ length: n }, (_, i) => `w${i}`));
      expect(selection.vector()).toHaveLength(n);
    }
  });

  it("rejects out-of-range indices", () => {
    const selection = new WordSelection(["a"]);
    expect(() => selection.toggle(1)).toThrow(RangeError);
    expect(() => selection.toggle(-1)).toThrow(RangeError);
  });
});
