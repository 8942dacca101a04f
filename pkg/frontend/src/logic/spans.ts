/** Span validation and the annotation record list state machine. */

export interface SpanDraft {
  startMs: number;
  endMs: number;
  level: number;
}

export interface AnnotationRecord {
  record_id: string;
  annotator_id: string;
  start: number;
  end: number;
  level: number;
  created_at: string;
  superseded_by: string | null;
}

/** Client-side validation mirroring the service's rules; returns an error
 *  message, or null when the draft may be submitted. */
export function validateSpan(draft: SpanDraft): string | null {
  if (!Number.isFinite(draft.startMs) || !Number.isFinite(draft.endMs)) {
    return "span boundaries must be set";
  }
  if (draft.startMs >= draft.endMs) {
    return "span start must come before its end";
  }
  if (!Number.isInteger(draft.level) || draft.level < 1 || draft.level > 5) {
    return "pick a fear level between 1 and 5";
  }
  return null;
}

export function overlaps(a: { start: number; end: number },
                         b: { start: number; end: number }): boolean {
  return a.start < b.end && b.start < a.end;
}

export interface PendingRecord extends AnnotationRecord {
  pending: true;
}

export type ListedRecord = AnnotationRecord | PendingRecord;

/**
 * Record list with optimistic updates.
 *
 * `add` inserts a pending entry and predicts which live records it will
 * supersede; `confirm` swaps the temporary id for the server's one;
 * `rollback` restores the pre-add state when the POST is rejected.
 */
export class RecordList {
  private records = new Map<string, ListedRecord>();
  private pendingSupersedes = new Map<string, string[]>();
  private nextTemp = 1;

  load(records: AnnotationRecord[]): void {
    this.records = new Map(records.map((r) => [r.record_id, { ...r }]));
    this.pendingSupersedes.clear();
  }

  all(): ListedRecord[] {
    return [...this.records.values()].sort((a, b) =>
      a.record_id.localeCompare(b.record_id, undefined, { numeric: true }));
  }

  live(): ListedRecord[] {
    return this.all().filter((r) => r.superseded_by === null);
  }

  add(annotatorId: string, draft: SpanDraft): string {
    const tempId = `pending-${this.nextTemp++}`;
    const struck: string[] = [];
    for (const record of this.records.values()) {
      if (record.superseded_by === null &&
          record.annotator_id === annotatorId &&
          overlaps(record, { start: draft.startMs, end: draft.endMs })) {
        record.superseded_by = tempId;
        struck.push(record.record_id);
      }
    }
    this.pendingSupersedes.set(tempId, struck);
    this.records.set(tempId, {
      record_id: tempId,
      annotator_id: annotatorId,
      start: draft.startMs,
      end: draft.endMs,
      level: draft.level,
      created_at: "sending",
      superseded_by: null,
      pending: true,
    });
    return tempId;
  }

  confirm(tempId: string, serverId: string): void {
    const entry = this.records.get(tempId);
    if (!entry) return;
    this.records.delete(tempId);
    this.records.set(serverId, { ...entry, record_id: serverId,
                                 created_at: "saved", pending: true } as PendingRecord);
    for (const struck of this.pendingSupersedes.get(tempId) ?? []) {
      const old = this.records.get(struck);
      if (old) old.superseded_by = serverId;
    }
    this.pendingSupersedes.delete(tempId);
  }

  rollback(tempId: string): void {
    this.records.delete(tempId);
    for (const struck of this.pendingSupersedes.get(tempId) ?? []) {
      const old = this.records.get(struck);
      if (old && old.superseded_by === tempId) old.superseded_by = null;
    }
    this.pendingSupersedes.delete(tempId);
  }
}
