/** Session state for one uploaded image: an ordered, replayable history of
 * prompt events. The wire prompt sent to the server is always derived by
 * replaying the full history, so undo is exact by construction. */

import { downsampleStroke } from "./scribble.js";
import type { WireBox, WirePoint, WirePrompt } from "./wire.js";
import { emptyPrompt } from "./wire.js";

export type PromptEvent =
  | { kind: "point"; x: number; y: number; label: "pos" | "neg" }
  | { kind: "box"; box: WireBox }
  | { kind: "stroke"; vertices: [number, number][] };

export class Session {
  readonly imageId: string;
  private events: PromptEvent[] = [];

  constructor(imageId: string) {
    this.imageId = imageId;
  }

  get history(): readonly PromptEvent[] {
    return this.events;
  }

  get hasBox(): boolean {
    return this.events.some((e) => e.kind === "box");
  }

  get length(): number {
    return this.events.length;
  }

  push(event: PromptEvent): void {
    this.events.push(event);
  }

  /** Remove the most recent event; returns false when there is nothing to undo. */
  undo(): boolean {
    return this.events.pop() !== undefined;
  }

  clear(): void {
    this.events = [];
  }

  /** Replay the history into a wire prompt. Points accumulate (strokes are
   * downsampled into positive points client-side); a later box replaces an
   * earlier one. */
  derivePrompt(): WirePrompt {
    const prompt = emptyPrompt();
    const points: WirePoint[] = [];
    for (const event of this.events) {
      if (event.kind === "point") {
        points.push({ x: event.x, y: event.y, label: event.label });
      } else if (event.kind === "box") {
        prompt.box = event.box;
      } else {
        points.push(...downsampleStroke(event.vertices));
      }
    }
    prompt.points = points;
    return prompt;
  }
}
