import { ChildProcess, execFile, spawn } from "node:child_process";
import { readdirSync } from "node:fs";
import path from "node:path";
import { fileURLToPath } from "node:url";
import { promisify } from "node:util";

export const PYTHON = process.env.PYTHON ?? "python3";
export const FIXTURES = path.join(
  path.dirname(fileURLToPath(import.meta.url)),
  ".fixtures"
);
export const SCRIPTS = path.join(
  path.dirname(fileURLToPath(import.meta.url)),
  "..",
  "scripts"
);

const execFileAsync = promisify(execFile);

export async function runPython(args: string[]): Promise<string> {
  const { stdout } = await execFileAsync(PYTHON, args, {
    maxBuffer: 64 * 1024 * 1024,
  });
  return stdout;
}

export interface Gateway {
  endpoint: string;
  reportDir: string;
  stop: () => Promise<void>;
}

/** Spawn `ckgate serve` on an ephemeral port and wait until it listens. */
export async function startGateway(
  graphPath: string,
  reportDir: string,
  extraFlags: string[] = []
): Promise<Gateway> {
  const child: ChildProcess = spawn(PYTHON, [
    "-m",
    "ckgate.cli",
    "serve",
    "--graph",
    graphPath,
    "--listen",
    "127.0.0.1:0",
    "--report-dir",
    reportDir,
    ...extraFlags,
  ]);
  const endpoint = await new Promise<string>((resolve, reject) => {
    let stderr = "";
    const timer = setTimeout(
      () => reject(new Error(`gateway did not start:\n${stderr}`)),
      30_000
    );
    child.stderr!.on("data", (chunk: Buffer) => {
      stderr += chunk.toString();
      const match = stderr.match(/listening on (\S+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    child.once("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`gateway exited early (${code}):\n${stderr}`));
    });
  });
  return {
    endpoint,
    reportDir,
    stop: () =>
      new Promise<void>((resolve) => {
        child.once("exit", () => resolve());
        child.kill("SIGTERM");
        setTimeout(() => {
          child.kill("SIGKILL");
          resolve();
        }, 5_000).unref();
      }),
  };
}

/** Wait for a fresh report_*.json to appear and return its path. */
export async function waitForReport(
  reportDir: string,
  ignore: Set<string>,
  timeoutMs = 20_000
): Promise<string> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    let names: string[] = [];
    try {
      names = readdirSync(reportDir).filter(
        (n) => n.startsWith("report_") && !ignore.has(n)
      );
    } catch {
      // directory not created yet
    }
    if (names.length > 0) {
      return path.join(reportDir, names.sort()[0]);
    }
    await new Promise((r) => setTimeout(r, 50));
  }
  throw new Error("no report file appeared in time");
}

export function listReports(reportDir: string): Set<string> {
  try {
    return new Set(readdirSync(reportDir).filter((n) => n.startsWith("report_")));
  } catch {
    return new Set();
  }
}
