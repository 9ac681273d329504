/** Minimal read-only table of the current selection's raw rows. */

import type { RawRow } from "./api.js";

export function renderSelectionTable(
  host: HTMLElement, rows: RawRow[], attributeOrder: string[], limit = 40,
): void {
  host.innerHTML = "";
  if (!rows.length) {
    host.textContent = "no selection";
    return;
  }
  const table = document.createElement("table");
  const head = table.insertRow();
  for (const name of ["id", ...attributeOrder, "label"]) {
    const th = document.createElement("th");
    th.textContent = name;
    head.appendChild(th);
  }
  for (const row of rows.slice(0, limit)) {
    const tr = table.insertRow();
    tr.insertCell().textContent = String(row.id);
    for (const name of attributeOrder) {
      tr.insertCell().textContent = String(row.values[name]);
    }
    tr.insertCell().textContent = row.label;
  }
  host.appendChild(table);
  if (rows.length > limit) {
    const note = document.createElement("div");
    note.className = "table-note";
    note.textContent = `showing ${limit} of ${rows.length} selected rows`;
    host.appendChild(note);
  }
}
