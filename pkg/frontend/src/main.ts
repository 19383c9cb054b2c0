/** Browser app: upload an image, place prompts, and view the returned
 * matte as an adjustable overlay. */

import { ApiClient, ApiError, LatestWins } from "./api.js";
import { matteToRgba } from "./overlay.js";
import type { DecodedMatte } from "./png16.js";
import { Session } from "./session.js";
import type { WireBox } from "./wire.js";

type Tool = "point" | "box" | "scribble";

const serviceUrl =
  new URLSearchParams(window.location.search).get("service") ?? "http://127.0.0.1:8000";
const api = new ApiClient(serviceUrl);
const inflight = new LatestWins();

const fileInput = document.querySelector<HTMLInputElement>("#file")!;
const toolButtons = Array.from(document.querySelectorAll<HTMLButtonElement>("[data-tool]"));
const undoButton = document.querySelector<HTMLButtonElement>("#undo")!;
const clearButton = document.querySelector<HTMLButtonElement>("#clear")!;
const opacitySlider = document.querySelector<HTMLInputElement>("#opacity")!;
const statusLine = document.querySelector<HTMLDivElement>("#status")!;
const stack = document.querySelector<HTMLDivElement>("#stack")!;
const imageCanvas = document.querySelector<HTMLCanvasElement>("#image")!;
const overlayCanvas = document.querySelector<HTMLCanvasElement>("#overlay")!;
const marksCanvas = document.querySelector<HTMLCanvasElement>("#marks")!;

let session: Session | null = null;
let tool: Tool = "point";
let lastMatte: DecodedMatte | null = null;
let dragStart: [number, number] | null = null;
let stroke: [number, number][] | null = null;

function setStatus(text: string, isError = false) {
  statusLine.textContent = text;
  statusLine.classList.toggle("error", isError);
}

function canvasPoint(event: MouseEvent): [number, number] {
  const rect = imageCanvas.getBoundingClientRect();
  const x = ((event.clientX - rect.left) / rect.width) * imageCanvas.width;
  const y = ((event.clientY - rect.top) / rect.height) * imageCanvas.height;
  return [
    Math.min(Math.max(x, 0), imageCanvas.width - 1),
    Math.min(Math.max(y, 0), imageCanvas.height - 1),
  ];
}

function refreshToolbar() {
  const boxActive = session?.hasBox ?? false;
  for (const button of toolButtons) {
    const t = button.dataset.tool as Tool;
    button.classList.toggle("active", t === tool);
    // box dominates mixed prompts server-side; disable point tools while
    // a box is active to avoid ambiguous sessions
    button.disabled = boxActive && t !== "box";
  }
  undoButton.disabled = !session || session.length === 0;
  clearButton.disabled = !session || session.length === 0;
}

function drawOverlay() {
  const ctx = overlayCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, overlayCanvas.width, overlayCanvas.height);
  if (!lastMatte) return;
  const opacity = Number(opacitySlider.value) / 100;
  const rgba = matteToRgba(lastMatte, opacity);
  ctx.putImageData(new ImageData(rgba, lastMatte.width, lastMatte.height), 0, 0);
}

function drawMarks() {
  const ctx = marksCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, marksCanvas.width, marksCanvas.height);
  if (!session) return;
  const prompt = session.derivePrompt();
  for (const p of prompt.points) {
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3, 0, Math.PI * 2);
    ctx.fillStyle = p.label === "pos" ? "#2ecc40" : "#ff4136";
    ctx.fill();
  }
  if (prompt.box) {
    const [x0, y0, x1, y1] = prompt.box;
    ctx.strokeStyle = "#ffdc00";
    ctx.lineWidth = 2;
    ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
  }
  if (stroke && stroke.length > 1) {
    ctx.strokeStyle = "#2ecc40";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(stroke[0][0], stroke[0][1]);
    for (const [x, y] of stroke.slice(1)) ctx.lineTo(x, y);
    ctx.stroke();
  }
}

async function repredict() {
  if (!session) return;
  if (session.length === 0) {
    lastMatte = null;
    drawOverlay();
    drawMarks();
    refreshToolbar();
    return;
  }
  const prompt = session.derivePrompt();
  setStatus("predicting…");
  try {
    const result = await inflight.run(() => api.predictMatte(session!.imageId, prompt));
    if (result === null) return; // superseded by a newer event
    lastMatte = result.matte;
    drawOverlay();
    drawMarks();
    refreshToolbar();
    setStatus(`ok (${result.response.latency_ms.toFixed(0)} ms)`);
  } catch (err) {
    session.undo(); // event did not take effect; keep state replayable
    drawMarks();
    refreshToolbar();
    setStatus(err instanceof ApiError ? `service error ${err.status}: ${err.message}` : String(err), true);
  }
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  try {
    setStatus("uploading…");
    const imageId = await api.uploadImage(file);
    session = new Session(imageId);
    lastMatte = null;
    const bitmap = await createImageBitmap(file);
    for (const canvas of [imageCanvas, overlayCanvas, marksCanvas]) {
      canvas.width = bitmap.width;
      canvas.height = bitmap.height;
    }
    stack.style.aspectRatio = `${bitmap.width} / ${bitmap.height}`;
    imageCanvas.getContext("2d")!.drawImage(bitmap, 0, 0);
    drawOverlay();
    drawMarks();
    refreshToolbar();
    setStatus(`session ${imageId.slice(0, 8)} ready`);
  } catch (err) {
    setStatus(err instanceof ApiError ? `upload failed (${err.status}): ${err.message}` : String(err), true);
  }
});

for (const button of toolButtons) {
  button.addEventListener("click", () => {
    tool = button.dataset.tool as Tool;
    refreshToolbar();
  });
}

undoButton.addEventListener("click", () => {
  if (!session) return;
  session.undo();
  refreshToolbar();
  void repredict();
});

clearButton.addEventListener("click", () => {
  if (!session) return;
  session.clear();
  lastMatte = null;
  drawOverlay();
  drawMarks();
  refreshToolbar();
  setStatus("cleared");
});

opacitySlider.addEventListener("input", drawOverlay);

marksCanvas.addEventListener("contextmenu", (e) => e.preventDefault());

marksCanvas.addEventListener("mousedown", (event) => {
  if (!session) return;
  const [x, y] = canvasPoint(event);
  if (tool === "box") {
    dragStart = [x, y];
  } else if (tool === "scribble") {
    stroke = [[x, y]];
  }
});

marksCanvas.addEventListener("mousemove", (event) => {
  if (!session) return;
  const [x, y] = canvasPoint(event);
  if (stroke) {
    stroke.push([x, y]);
    drawMarks();
  } else if (dragStart) {
    drawMarks();
    const ctx = marksCanvas.getContext("2d")!;
    ctx.strokeStyle = "#ffdc00";
    ctx.setLineDash([4, 3]);
    ctx.strokeRect(dragStart[0], dragStart[1], x - dragStart[0], y - dragStart[1]);
    ctx.setLineDash([]);
  }
});

marksCanvas.addEventListener("mouseup", (event) => {
  if (!session) return;
  const [x, y] = canvasPoint(event);
  if (tool === "point" && !dragStart && !stroke) {
    const label = event.altKey || event.button === 2 ? "neg" : "pos";
    session.push({ kind: "point", x, y, label });
    void repredict();
  } else if (dragStart) {
    const box: WireBox = [
      Math.min(dragStart[0], x),
      Math.min(dragStart[1], y),
      Math.max(dragStart[0], x),
      Math.max(dragStart[1], y),
    ];
    dragStart = null;
    session.push({ kind: "box", box });
    void repredict();
  } else if (stroke) {
    const vertices = stroke;
    stroke = null;
    if (vertices.length > 1) {
      session.push({ kind: "stroke", vertices });
      void repredict();
    }
  }
});

refreshToolbar();
setStatus(`service: ${serviceUrl}`);
void api
  .health()
  .then((h) => setStatus(`service ok, checkpoint ${h.checkpoint_hash.slice(0, 8)}`))
  .catch(() => setStatus("service unreachable — start it with: promptmatte serve", true));
