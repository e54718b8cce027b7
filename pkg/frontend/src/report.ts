// Parsing for the run report the service serves as CSV. The five columns
// are fixed; object names are plain slugs and numbers are plain decimals,
// so no field ever contains a comma or quote.

export const REPORT_COLUMNS = [
  'Object',
  'Primitive-Stylization (s)',
  'Mesh Generation (s)',
  'SIGNeRF (min)',
  'Total (min)',
] as const;

export interface ReportRow {
  object: string;
  stylizeSeconds: number;
  meshSeconds: number;
  nerfMinutes: number;
  totalMinutes: number;
}

export function parseReport(csv: string): ReportRow[] {
  const lines = csv.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error('empty report');
  }
  const header = lines[0].split(',');
  if (
    header.length !== REPORT_COLUMNS.length ||
    header.some((name, i) => name !== REPORT_COLUMNS[i])
  ) {
    throw new Error(`unexpected report header: ${lines[0]}`);
  }
  return lines.slice(1).map((line, index) => {
    const fields = line.split(',');
    if (fields.length !== REPORT_COLUMNS.length) {
      throw new Error(`report row ${index + 1} has ${fields.length} fields`);
    }
    const numbers = fields.slice(1).map((f) => Number(f));
    if (numbers.some((n) => !Number.isFinite(n))) {
      throw new Error(`report row ${index + 1} has a non-numeric timing: ${line}`);
    }
    return {
      object: fields[0],
      stylizeSeconds: numbers[0],
      meshSeconds: numbers[1],
      nerfMinutes: numbers[2],
      totalMinutes: numbers[3],
    };
  });
}
