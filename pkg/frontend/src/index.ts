export * from "./geometry.js";
export * from "./renderer.js";
export * from "./view-state.js";
export * from "./api.js";
export * from "./channel.js";
export * from "./session.js";
export * from "./replay.js";
