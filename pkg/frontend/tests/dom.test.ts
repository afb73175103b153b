// @vitest-environment jsdom
/**
 * Browser-level tests: the full app running against a mocked service and a
 * stub audio element, driven through real DOM events.
 */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { AnnotationApp } from "../src/app.js";
import type { Batch, SubmitRequest } from "../src/types.js";

class FakeAudio {
  src = "";
  private listeners: Record<string, Array<() => void>> = {};

  addEventListener(type: string, fn: () => void): void {
    (this.listeners[type] ??= []).push(fn);
  }

  private emit(type: string): void {
    for (const fn of this.listeners[type] ?? []) fn();
  }

  play(): void {
    this.emit("play");
  }

  end(): void {
    this.emit("ended");
  }

  seek(): void {
    this.emit("seeked");
  }

  fail(): void {
    this.emit("error");
  }

  load(): void {}
}

function makeBatch(nUtterances: number, nWords = 5): Batch {
  return {
    batch_id: "batch-7",
    annotator_id: "tester",
    utterances: Array.from({ length: nUtterances }, (_, u) => ({
      utterance_id: `u${u.toString().padStart(2, "0")}`,
      tokens: Array.from({ length: nWords }, (_, w) => `word${w}`),
      audio_url: `/audio/u${u}`,
      duration_seconds: 1.0,
    })),
  };
}

interface Harness {
  app: AnnotationApp;
  root: HTMLElement;
  audios: FakeAudio[];
  submissions: SubmitRequest[];
  currentAudio(): FakeAudio;
}

async function mount(batch: Batch, prescreenItems: Array<{ id: string; prompt: string }> = []): Promise<Harness> {
  const submissions: SubmitRequest[] = [];
  const fetchImpl = async (input: string, init?: RequestInit): Promise<Response> => {
    const respond = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), { status });
    if (input.endsWith("/prescreen") && (!init || init.method !== "POST")) {
      return respond({ items: prescreenItems });
    }
    if (input.endsWith("/prescreen")) {
      const body = JSON.parse(String(init?.body));
      const passed = body.answers.every((a: string) => a === "3");
      return respond({ passed, blocked: false });
    }
    if (input.includes("/batch")) {
      return respond(batch);
    }
    if (input.endsWith("/submit")) {
      submissions.push(JSON.parse(String(init?.body)));
      return respond({ status: "accepted", completion_code: "code12345678" });
    }
    return respond({ detail: `unexpected ${input}` }, 404);
  };

  const root = document.createElement("div");
  document.body.appendChild(root);
  const audios: FakeAudio[] = [];
  const app = new AnnotationApp(root, new ApiClient("", fetchImpl), {
    annotatorId: "tester",
    audioFactory: () => {
      const audio = new FakeAudio();
      audios.push(audio);
      return audio;
    },
  });
  await app.start();
  return { app, root, audios, submissions, currentAudio: () => audios[audios.length - 1] };
}

function word(root: HTMLElement, index: number): HTMLElement {
  return root.querySelector(`[data-word="${index}"]`) as HTMLElement;
}

function testid(root: HTMLElement, id: string): HTMLElement {
  return root.querySelector(`[data-testid="${id}"]`) as HTMLElement;
}

beforeEach(() => {
  document.body.textContent = "";
});

describe("task view gating", () => {
  it("ignores word clicks before playback starts", async () => {
    const { root } = await mount(makeBatch(1));
    word(root, 0).click();
    word(root, 1).click();
    expect(root.querySelectorAll(".word.selected")).toHaveLength(0);
  });

  it("accepts clicks while audio is playing", async () => {
    const harness = await mount(makeBatch(1));
    harness.currentAudio().play();
    word(harness.root, 1).click();
    expect(word(harness.root, 1).classList.contains("selected")).toBe(true);
  });

  it("toggling a word twice deselects it", async () => {
    const harness = await mount(makeBatch(1));
    harness.currentAudio().play();
    word(harness.root, 2).click();
    word(harness.root, 2).click();
    expect(word(harness.root, 2).classList.contains("selected")).toBe(false);
  });

  it("keeps submission blocked below two complete plays", async () => {
    const harness = await mount(makeBatch(1));
    const next = testid(harness.root, "next");
    expect(next.hasAttribute("disabled")).toBe(true);
    harness.currentAudio().play();
    harness.currentAudio().end();
    expect(next.hasAttribute("disabled")).toBe(true);
    next.click();
    expect(testid(harness.root, "task")).not.toBeNull(); // still on the task
    harness.currentAudio().end();
    expect(next.hasAttribute("disabled")).toBe(false);
  });

  it("seeking never unlocks submission", async () => {
    const harness = await mount(makeBatch(1));
    harness.currentAudio().play();
    for (let i = 0; i < 6; i++) harness.currentAudio().seek();
    expect(testid(harness.root, "next").hasAttribute("disabled")).toBe(true);
  });

  it("shows a retry prompt when audio fails to load", async () => {
    const harness = await mount(makeBatch(1));
    expect(testid(harness.root, "retry").hasAttribute("hidden")).toBe(true);
    harness.currentAudio().fail();
    expect(testid(harness.root, "retry").hasAttribute("hidden")).toBe(false);
  });
});

describe("batch progression and submission", () => {
  it("submits exactly the on-screen selection for a 20-utterance batch", async () => {
    const harness = await mount(makeBatch(20));
    const expected: number[][] = [];
    for (let u = 0; u < 20; u++) {
      expect(testid(harness.root, "progress").textContent).toBe(
        `Utterance ${u + 1} of 20`,
      );
      const audio = harness.currentAudio();
      audio.play();
      const vector = [0, 0, 0, 0, 0];
      // click a varying pattern, with one double-click to exercise toggling
      word(harness.root, u % 5).click();
      vector[u % 5] = 1;
      if (u % 4 === 0) {
        word(harness.root, 3).click();
        word(harness.root, 3).click(); // net no-op
      }
      // the DOM is the source of truth for what we expect to be submitted
      const selected = Array.from(
        harness.root.querySelectorAll(".word"),
      ).map((node) => (node.classList.contains("selected") ? 1 : 0));
      expect(selected).toEqual(vector);
      expected.push(vector);
      audio.end();
      audio.end();
      testid(harness.root, "next").click();
      await Promise.resolve();
    }
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(harness.submissions).toHaveLength(1);
    const payload = harness.submissions[0];
    expect(payload.batch_id).toBe("batch-7");
    expect(payload.utterances).toHaveLength(20);
    payload.utterances.forEach((utt, u) => {
      expect(utt.labels).toEqual(expected[u]);
      expect(utt.play_count).toBe(2);
    });
    expect(testid(harness.root, "status").textContent).toContain("code12345678");
  });

  it("uses a fresh audio element and gate per utterance", async () => {
    const harness = await mount(makeBatch(2));
    harness.currentAudio().play();
    harness.currentAudio().end();
    harness.currentAudio().end();
    testid(harness.root, "next").click();
    expect(harness.audios).toHaveLength(2);
    expect(testid(harness.root, "next").hasAttribute("disabled")).toBe(true);
  });
});

describe("prescreen flow", () => {
  it("gates the batch behind correct answers", async () => {
    const harness = await mount(makeBatch(1), [{ id: "q1", prompt: "tones?" }]);
    expect(testid(harness.root, "prescreen")).not.toBeNull();
    const input = testid(harness.root, "prescreen-q1") as HTMLInputElement;
    input.value = "7";
    testid(harness.root, "prescreen-submit").click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(testid(harness.root, "prescreen-message").textContent).toContain("Try again");
    input.value = "3";
    testid(harness.root, "prescreen-submit").click();
    await new Promise((resolve) => setTimeout(resolve, 0));
    expect(testid(harness.root, "task")).not.toBeNull();
  });
});
