/**
 * Small seeded tree-ensemble classifier over numeric feature vectors.
 *
 * CART-style splits on gini impurity, depth- and leaf-size-limited,
 * bagged over bootstrap samples with majority vote. Deterministic for a
 * given seed, which keeps end-to-end runs reproducible.
 */

export type Matrix = number[][];

/** mulberry32: tiny deterministic PRNG, plenty for bootstrap sampling. */
export function seededRandom(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

interface SplitNode {
  kind: "split";
  feature: number;
  threshold: number;
  left: TreeNode;
  right: TreeNode;
}

interface LeafNode {
  kind: "leaf";
  label: number;
}

type TreeNode = SplitNode | LeafNode;

function majority(labels: number[]): number {
  const counts = new Map<number, number>();
  for (const label of labels) {
    counts.set(label, (counts.get(label) ?? 0) + 1);
  }
  let best = labels[0];
  let bestCount = -1;
  for (const [label, count] of [...counts.entries()].sort((a, b) => a[0] - b[0])) {
    if (count > bestCount) {
      best = label;
      bestCount = count;
    }
  }
  return best;
}

function gini(labels: number[]): number {
  const counts = new Map<number, number>();
  for (const label of labels) {
    counts.set(label, (counts.get(label) ?? 0) + 1);
  }
  let impurity = 1;
  for (const count of counts.values()) {
    const p = count / labels.length;
    impurity -= p * p;
  }
  return impurity;
}

export interface TreeOptions {
  maxDepth?: number;
  minLeaf?: number;
}

export class DecisionTree {
  private root: TreeNode | null = null;

  constructor(private options: TreeOptions = {}) {}

  fit(features: Matrix, labels: number[]): this {
    if (features.length === 0) {
      throw new Error("cannot fit on an empty training set");
    }
    this.root = this.build(features, labels, 0);
    return this;
  }

  private build(features: Matrix, labels: number[], depth: number): TreeNode {
    const maxDepth = this.options.maxDepth ?? 4;
    const minLeaf = this.options.minLeaf ?? 2;
    const impurity = gini(labels);
    if (depth >= maxDepth || labels.length < 2 * minLeaf || impurity === 0) {
      return { kind: "leaf", label: majority(labels) };
    }
    let best: { feature: number; threshold: number; score: number } | null = null;
    const width = features[0].length;
    for (let feature = 0; feature < width; feature++) {
      const values = [...new Set(features.map((row) => row[feature]))].sort((a, b) => a - b);
      for (let i = 1; i < values.length; i++) {
        const threshold = (values[i - 1] + values[i]) / 2;
        const leftLabels: number[] = [];
        const rightLabels: number[] = [];
        for (let j = 0; j < features.length; j++) {
          (features[j][feature] <= threshold ? leftLabels : rightLabels).push(labels[j]);
        }
        if (leftLabels.length < minLeaf || rightLabels.length < minLeaf) {
          continue;
        }
        const score =
          (leftLabels.length * gini(leftLabels) + rightLabels.length * gini(rightLabels)) /
          labels.length;
        if (best === null || score < best.score) {
          best = { feature, threshold, score };
        }
      }
    }
    if (best === null || best.score >= impurity) {
      return { kind: "leaf", label: majority(labels) };
    }
    const leftRows: Matrix = [];
    const leftLabels: number[] = [];
    const rightRows: Matrix = [];
    const rightLabels: number[] = [];
    for (let j = 0; j < features.length; j++) {
      if (features[j][best.feature] <= best.threshold) {
        leftRows.push(features[j]);
        leftLabels.push(labels[j]);
      } else {
        rightRows.push(features[j]);
        rightLabels.push(labels[j]);
      }
    }
    return {
      kind: "split",
      feature: best.feature,
      threshold: best.threshold,
      left: this.build(leftRows, leftLabels, depth + 1),
      right: this.build(rightRows, rightLabels, depth + 1),
    };
  }

  predict(row: number[]): number {
    let node = this.root;
    if (node === null) {
      throw new Error("predict before fit");
    }
    while (node.kind === "split") {
      node = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return node.label;
  }
}

export interface EnsembleOptions extends TreeOptions {
  trees?: number;
  seed?: number;
}

export class BaggedEnsemble {
  private trees: DecisionTree[] = [];

  constructor(private options: EnsembleOptions = {}) {}

  fit(features: Matrix, labels: number[]): this {
    const count = this.options.trees ?? 7;
    const rand = seededRandom(this.options.seed ?? 13);
    this.trees = [];
    for (let t = 0; t < count; t++) {
      const sampleRows: Matrix = [];
      const sampleLabels: number[] = [];
      for (let i = 0; i < features.length; i++) {
        const pick = Math.floor(rand() * features.length);
        sampleRows.push(features[pick]);
        sampleLabels.push(labels[pick]);
      }
      this.trees.push(new DecisionTree(this.options).fit(sampleRows, sampleLabels));
    }
    return this;
  }

  predict(row: number[]): number {
    if (this.trees.length === 0) {
      throw new Error("predict before fit");
    }
    return majority(this.trees.map((tree) => tree.predict(row)));
  }
}
