/** Template panel rendering: token slots as text with unprintable bytes as
 * \xNN badges, gap slots as visually distinct placeholders. */

import type { TemplateSlot } from "./api.js";

export interface RenderedPiece {
  kind: "text" | "byte" | "gap";
  value: string;
}

const B64_ALPHABET =
  "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

/** Decode base64 without atob/Buffer so browser and node behave alike. */
export function base64ToBytes(b64: string): Uint8Array {
  const out: number[] = [];
  let buffer = 0;
  let bits = 0;
  for (const ch of b64) {
    const value = B64_ALPHABET.indexOf(ch);
    if (value < 0) continue; // padding and whitespace
    buffer = (buffer << 6) | value;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push((buffer >> bits) & 0xff);
    }
  }
  return Uint8Array.from(out);
}

/** Flatten a slot list into renderable pieces; printable ASCII runs stay
 * text, every other byte becomes its own \xNN badge. */
export function slotPieces(slots: TemplateSlot[]): RenderedPiece[] {
  const pieces: RenderedPiece[] = [];
  let text = "";
  const flush = () => {
    if (text) {
      pieces.push({ kind: "text", value: text });
      text = "";
    }
  };
  for (const slot of slots) {
    if ("gap" in slot) {
      flush();
      pieces.push({ kind: "gap", value: "⟨*⟩" });
      continue;
    }
    for (const byte of base64ToBytes(slot.t)) {
      if (byte >= 0x20 && byte <= 0x7e && byte !== 0x5c) {
        text += String.fromCharCode(byte);
      } else if (byte === 0x5c) {
        text += "\\\\";
      } else {
        flush();
        pieces.push({ kind: "byte", value: `\\x${byte.toString(16).padStart(2, "0")}` });
      }
    }
  }
  flush();
  return pieces;
}

export function renderTemplatePanel(doc: Document, slots: TemplateSlot[],
                                    stability: number): HTMLElement {
  const panel = doc.createElement("div");
  panel.className = "template-panel";
  const meta = doc.createElement("div");
  meta.className = "template-stability";
  meta.textContent = `stability ${(stability * 100).toFixed(0)}%`;
  panel.appendChild(meta);
  const body = doc.createElement("pre");
  body.className = "template-body";
  for (const piece of slotPieces(slots)) {
    const span = doc.createElement("span");
    span.className = `slot-${piece.kind}`;
    span.textContent = piece.value;
    body.appendChild(span);
  }
  panel.appendChild(body);
  return panel;
}
