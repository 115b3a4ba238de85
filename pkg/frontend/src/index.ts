export * from "./messages.js";
export * from "./codec.js";
export * from "./client.js";
export * from "./classifier.js";
export * from "./app.js";
