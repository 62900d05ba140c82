import { describe, expect, it } from "vitest";

import {
  MAX_CARDS,
  h,
  renderErrorCard,
  renderHealthLine,
  renderMeter,
  renderRecordingHint,
  renderResultCards,
  renderRoundTrip,
  type VNode,
} from "../src/render.js";
import type { SpeakerResult } from "../src/types.js";
import type { UploadFailure } from "../src/state.js";

function result(rank: number): SpeakerResult {
  return {
    rank,
    speaker_id: `spk${String(rank).padStart(4, "0")}`,
    display_name: `Speaker ${rank}`,
    score: 50 - rank,
    video_id: `vid${rank}`,
    clip_start_s: 30.5 * rank,
    clip_end_s: 30.5 * rank + 6,
    video_url: `https://www.youtube.com/watch?v=vid${rank}`,
  };
}

function walk(node: VNode | string, visit: (n: VNode) => void): void {
  if (typeof node === "string") return;
  visit(node);
  for (const child of node.children) walk(child, visit);
}

function findAll(node: VNode, predicate: (n: VNode) => boolean): VNode[] {
  const hits: VNode[] = [];
  walk(node, (n) => {
    if (predicate(n)) hits.push(n);
  });
  return hits;
}

function textOf(node: VNode | string): string {
  if (typeof node === "string") return node;
  return node.children.map(textOf).join("");
}

describe("renderResultCards", () => {
  it("shows at most five cards, best rank first", () => {
    const tree = renderResultCards([result(4), result(1), result(6), result(3), result(2), result(5)]);
    const cards = findAll(tree, (n) => n.props.class === "result-card");
    expect(cards).toHaveLength(MAX_CARDS);
    expect(cards.map((c) => c.props["data-rank"])).toEqual(["1", "2", "3", "4", "5"]);
  });

  it("is pure: the same response renders the same tree", () => {
    const results = [result(1), result(2), result(3)];
    const a = renderResultCards(results);
    const b = renderResultCards(results.map((r) => ({ ...r })));
    expect(a).toEqual(b);
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });

  it("does not mutate its input", () => {
    const results = [result(3), result(1), result(2)];
    const order = results.map((r) => r.rank);
    renderResultCards(results);
    expect(results.map((r) => r.rank)).toEqual(order);
  });

  it("links each card to its video as a thumbnail by default", () => {
    const tree = renderResultCards([result(1)]);
    const links = findAll(tree, (n) => n.tag === "a");
    expect(links).toHaveLength(1);
    expect(links[0].props.href).toBe("https://www.youtube.com/watch?v=vid1");
    expect(links[0].props.target).toBe("_blank");
    const imgs = findAll(tree, (n) => n.tag === "img");
    expect(imgs).toHaveLength(1);
    expect(imgs[0].props.src).toContain("vid1");
    expect(findAll(tree, (n) => n.tag === "iframe")).toHaveLength(0);
  });

  it("switches to inline players only when the embed flag is set", () => {
    const tree = renderResultCards([result(1)], { embedVideos: true });
    const frames = findAll(tree, (n) => n.tag === "iframe");
    expect(frames).toHaveLength(1);
    expect(frames[0].props.src).toBe("https://www.youtube.com/embed/vid1?start=30");
    expect(findAll(tree, (n) => n.tag === "a")).toHaveLength(0);
  });

  it("names the speaker and shows the score on each card", () => {
    const tree = renderResultCards([result(2)]);
    const text = textOf(tree);
    expect(text).toContain("Speaker 2");
    expect(text).toContain((50 - 2).toFixed(2));
  });

  it("renders a friendly empty state", () => {
    const tree = renderResultCards([]);
    expect(textOf(tree)).toContain("No matches");
  });
});

describe("renderRoundTrip", () => {
  it("displays the measured time within 50 ms of the oracle", () => {
    const oracleMs = 1234.5;
    const tree = renderRoundTrip(oracleMs);
    const shownMs = parseFloat(tree.props["data-ms"]);
    expect(Math.abs(shownMs - oracleMs)).toBeLessThanOrEqual(50);
    const secondsShown = parseFloat(/([\d.]+)\s*s/.exec(textOf(tree))![1]);
    expect(Math.abs(secondsShown * 1000 - oracleMs)).toBeLessThanOrEqual(50);
  });
});

describe("renderRecordingHint", () => {
  it("nudges toward five seconds for short takes", () => {
    for (const d of [0, 1.2, 4.9]) {
      const tree = renderRecordingHint(d);
      expect(tree.props.class).toContain("nudge");
      expect(textOf(tree)).toContain("5 seconds");
    }
  });

  it("marks nine seconds and beyond as ideal", () => {
    for (const d of [9, 12.5, 60]) {
      const tree = renderRecordingHint(d);
      const badges = findAll(tree, (n) => n.props.class === "badge ideal");
      expect(badges).toHaveLength(1);
      expect(textOf(badges[0])).toBe("ideal length");
    }
  });

  it("is neutral in between", () => {
    const tree = renderRecordingHint(6.5);
    expect(tree.props.class).not.toContain("nudge");
    expect(findAll(tree, (n) => n.props.class === "badge ideal")).toHaveLength(0);
  });
});

describe("renderErrorCard", () => {
  const guidance =
    "Recording is too short. Please record at least 5 seconds of clear " +
    "speech; around 9 seconds works best.";

  it("renders a 422 as guidance carrying the server's message verbatim", () => {
    const failure: UploadFailure = {
      kind: "http",
      status: 422,
      code: "duration_out_of_bounds",
      message: guidance,
      retryable: false,
    };
    const tree = renderErrorCard(failure);
    expect(tree.props.class).toBe("guidance");
    expect(textOf(tree)).toContain("at least 5 seconds");
    expect(textOf(tree)).toContain("9 seconds works best");
  });

  it("renders other HTTP failures with code, request id, and retry advice", () => {
    const failure: UploadFailure = {
      kind: "http",
      status: 503,
      code: "models_not_loaded",
      message: "Models are still loading.",
      requestId: "r-42",
      retryable: true,
    };
    const tree = renderErrorCard(failure);
    expect(tree.props.class).toBe("error-card");
    const text = textOf(tree);
    expect(text).toContain("models_not_loaded");
    expect(text).toContain("r-42");
    expect(text).toContain("try submitting again");
  });

  it("tells the user to re-record when retrying the same clip is pointless", () => {
    const failure: UploadFailure = {
      kind: "http",
      status: 400,
      code: "malformed_audio",
      message: "Could not parse the audio.",
      retryable: false,
    };
    expect(textOf(renderErrorCard(failure))).toContain("fresh clip");
  });

  it("handles network failures without an HTTP status", () => {
    const failure: UploadFailure = {
      kind: "network",
      message: "could not reach the identification service",
      retryable: true,
    };
    const tree = renderErrorCard(failure);
    expect(tree.props.class).toBe("error-card");
    expect(textOf(tree)).toContain("could not reach");
  });
});

describe("renderHealthLine", () => {
  it("reports readiness with the gallery size", () => {
    const tree = renderHealthLine({
      status: "ok",
      model_version: 1,
      gallery_size: 750,
      num_speakers: 250,
      methods: ["plda"],
      uptime_s: 3.2,
    });
    expect(tree.props.class).toBe("health ok");
    expect(textOf(tree)).toContain("250 speakers");
  });

  it("reports loading and unknown states distinctly", () => {
    const loading = renderHealthLine({
      status: "loading",
      model_version: 1,
      gallery_size: 0,
      num_speakers: 0,
      methods: [],
      uptime_s: 0.1,
    });
    expect(loading.props.class).toBe("health degraded");
    expect(renderHealthLine(null).props.class).toBe("health unknown");
  });
});

describe("renderMeter", () => {
  it("shows the running clock and the latest level", () => {
    const tree = renderMeter({
      status: "recording",
      durationS: 7.25,
      peaks: [0.1, 0.8, 0.4],
      response: null,
      failure: null,
    });
    expect(textOf(tree)).toContain("7.3 s");
    const level = findAll(tree, (n) => n.props.class === "meter-level")[0];
    expect(level.props.style).toContain("0.400");
  });
});

describe("h", () => {
  it("builds plain serializable nodes", () => {
    const node = h("div", { class: "x" }, "hello", h("b", {}, "!"));
    expect(node).toEqual({
      tag: "div",
      props: { class: "x" },
      children: ["hello", { tag: "b", props: {}, children: ["!"] }],
    });
  });
});
