export * from "./formats";
export * from "./transforms";
export * from "./dataset";
export {
  buildGridNetwork,
  DEFAULT_TRAIN_OPTIONS,
  flipLeftRight,
  trainAnchorModel,
  trainGridModel,
} from "./model";
export type { SplitInputs, TrainedScores, TrainOptions } from "./model";
export { measureCostProfile } from "./profile";
export type { ProfiledNetwork, ProfileSample } from "./profile";
export { main } from "./cli";
