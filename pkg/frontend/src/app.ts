/**
 * Example learned app: extracts per-subject gene/protein features
 * through the query protocol, fits a bagged tree ensemble on the
 * connected (labelled) samples, predicts every subject, and submits
 * both tasks. The point is the plumbing, not the model.
 */

import { BaggedEnsemble } from "./classifier.js";
import { ClientSession } from "./client.js";

export const SUBJECTS_QUERY = "MATCH (s:Subject) RETURN s.subject_id";
export const LINKS_QUERY =
  "MATCH (s:Subject)<-[:BELONGS_TO_SUBJECT]-(b:Biological_Sample)" +
  "-[:HAS_DISEASE]->(d:Disease) RETURN s.subject_id, d.name, d.synonyms";
export const GENES_QUERY =
  "MATCH (s:Subject)<-[:BELONGS_TO_SUBJECT]-(b:Biological_Sample)" +
  "-[e:HAS_DAMAGE]->(g:Gene) RETURN s.subject_id, g.name, e.score";
export const PROTEINS_QUERY =
  "MATCH (s:Subject)<-[:BELONGS_TO_SUBJECT]-(b:Biological_Sample)" +
  "-[e:HAS_PROTEIN]->(p:Protein) RETURN s.subject_id, p.name, e.score";

const ICD10_PREFIX = "ICD10:";
const MARKER_GENES = 16;

interface SubjectFacts {
  genes: Map<string, number>; // gene name -> score
  proteinScores: number[];
  status?: "0" | "1";
  letter?: string;
  letterCode?: string;
}

export interface ClassifierOutcome {
  subjects: string[];
  taskA: Map<string, string>;
  taskB: Map<string, string>;
  acked: Map<string, number>;
}

export async function exampleClassifier(session: ClientSession): Promise<ClassifierOutcome> {
  const subjectsTable = await session.query(SUBJECTS_QUERY);
  const subjects = [...new Set(subjectsTable.rows.map((row) => String(row[0])))].sort();

  const facts = new Map<string, SubjectFacts>();
  const factsFor = (subject: string): SubjectFacts => {
    let entry = facts.get(subject);
    if (!entry) {
      entry = { genes: new Map(), proteinScores: [] };
      facts.set(subject, entry);
    }
    return entry;
  };

  const links = await session.query(LINKS_QUERY);
  for (const [subject, diseaseName, synonyms] of links.rows as Array<
    [string, string, string[] | null]
  >) {
    const entry = factsFor(subject);
    if (diseaseName === "control") {
      entry.status = "0";
      continue;
    }
    entry.status = entry.status === "0" ? "0" : "1";
    for (const synonym of synonyms ?? []) {
      if (!synonym.startsWith(ICD10_PREFIX)) continue;
      const code = synonym.slice(ICD10_PREFIX.length);
      if (!/^[A-Za-z]/.test(code)) continue;
      const letter = code[0].toUpperCase();
      if (entry.letterCode === undefined || code < entry.letterCode) {
        entry.letter = letter;
        entry.letterCode = code;
      }
    }
  }

  const genes = await session.query(GENES_QUERY);
  for (const [subject, gene, score] of genes.rows as Array<[string, string, number]>) {
    factsFor(subject).genes.set(gene, score);
  }
  const proteins = await session.query(PROTEINS_QUERY);
  for (const [subject, , score] of proteins.rows as Array<[string, string, number]>) {
    factsFor(subject).proteinScores.push(score);
  }

  // marker genes: the most widely shared ones, ties broken by name
  const geneFrequency = new Map<string, number>();
  for (const entry of facts.values()) {
    for (const gene of entry.genes.keys()) {
      geneFrequency.set(gene, (geneFrequency.get(gene) ?? 0) + 1);
    }
  }
  const markers = [...geneFrequency.entries()]
    .sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1))
    .slice(0, MARKER_GENES)
    .map(([name]) => name);

  const featuresOf = (subject: string): number[] => {
    const entry = facts.get(subject) ?? { genes: new Map(), proteinScores: [] };
    const geneScores = [...entry.genes.values()];
    const sum = (xs: number[]) => xs.reduce((a, b) => a + b, 0);
    const row = [
      geneScores.length,
      geneScores.length ? sum(geneScores) / geneScores.length : 0,
      geneScores.length ? Math.max(...geneScores) : 0,
      entry.proteinScores.length,
      entry.proteinScores.length ? sum(entry.proteinScores) / entry.proteinScores.length : 0,
    ];
    for (const marker of markers) {
      row.push(entry.genes.has(marker) ? 1 : 0);
    }
    return row;
  };

  const taskA = predictTask(
    subjects,
    featuresOf,
    subjects.filter((s) => facts.get(s)?.status !== undefined),
    (s) => (facts.get(s)!.status === "1" ? 1 : 0),
    (label) => (label === 1 ? "1" : "0"),
    "1"
  );

  const lettered = subjects.filter((s) => {
    const entry = facts.get(s);
    return entry?.status === "1" && entry.letter !== undefined;
  });
  const letters = [...new Set(lettered.map((s) => facts.get(s)!.letter!))].sort();
  const taskB = predictTask(
    subjects,
    featuresOf,
    lettered,
    (s) => letters.indexOf(facts.get(s)!.letter!),
    (label) => letters[label] ?? "A",
    letters[0] ?? "A"
  );

  const acked = new Map<string, number>();
  for (const task of session.tasks) {
    const predictions = task === "A" ? taskA : taskB;
    const rows = subjects.map((s) => [s, predictions.get(s)!] as [string, string]);
    acked.set(task, await session.submit(task, rows));
  }
  session.done();
  return { subjects, taskA, taskB, acked };
}

function predictTask(
  subjects: string[],
  featuresOf: (subject: string) => number[],
  trainSubjects: string[],
  labelOf: (subject: string) => number,
  labelName: (label: number) => string,
  fallback: string
): Map<string, string> {
  const predictions = new Map<string, string>();
  const distinct = new Set(trainSubjects.map(labelOf));
  if (trainSubjects.length < 2 || distinct.size < 2) {
    const constant = trainSubjects.length ? labelName(labelOf(trainSubjects[0])) : fallback;
    for (const subject of subjects) {
      predictions.set(subject, constant);
    }
    return predictions;
  }
  const model = new BaggedEnsemble({ trees: 7, maxDepth: 4, minLeaf: 2, seed: 1729 }).fit(
    trainSubjects.map(featuresOf),
    trainSubjects.map(labelOf)
  );
  for (const subject of subjects) {
    predictions.set(subject, labelName(model.predict(featuresOf(subject))));
  }
  return predictions;
}
