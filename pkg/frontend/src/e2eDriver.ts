/**
 * Headless scripted annotator used by the end-to-end test: runs the real
 * session logic (gating, selection, payload assembly) against a live
 * service over HTTP, simulating the audio events a browser would emit.
 *
 * Usage: node dist/e2eDriver.js <base_url> <annotator_id> [answers_csv]
 * Prints the submit response as JSON; exits non-zero on any failure.
 */

import { ApiClient } from "./api.js";
import { AnnotationSession } from "./session.js";

async function main(): Promise<void> {
  const [baseUrl, annotatorId, answersCsv] = process.argv.slice(2);
  if (!baseUrl || !annotatorId) {
    throw new Error("usage: e2eDriver <base_url> <annotator_id> [answers_csv]");
  }
  const client = new ApiClient(baseUrl);

  const { items } = await client.prescreenItems();
  if (items.length > 0) {
    const answers = (answersCsv ?? "").split(",");
    const result = await client.prescreen(annotatorId, answers);
    if (!result.passed) {
      throw new Error("prescreen failed");
    }
  }

  const batch = await client.requestBatch(annotatorId);
  const session = new AnnotationSession(batch);
  while (!session.complete) {
    const utterance = session.current();
    // Simulate a browser playback pass: start, play to the end twice.
    session.gate.onPlay();
    session.gate.onEnded();
    session.gate.onEnded();
    // Deterministic selection: emphasize every third word.
    utterance.tokens.forEach((_, index) => {
      if (index % 3 === 0) {
        session.clickWord(index);
      }
    });
    session.advance();
  }
  // Wait so the wall-clock session duration clears the server's two-full-plays check.
  const need = batch.utterances.reduce((s, u) => s + u.duration_seconds, 0) * 2;
  await new Promise((resolve) => setTimeout(resolve, Math.ceil(need * 1000) + 500));
  const response = await client.submit(session.buildSubmission());
  console.log(JSON.stringify(response));
  if (response.status !== "accepted") {
    throw new Error(`submission not accepted: ${JSON.stringify(response)}`);
  }
}

main().catch((error) => {
  console.error(String(error));
  process.exit(1);
});
