export {
  ControlError,
  EpisodeFinishedError,
  RacingEnv,
  StaleSensorError,
} from "./client.js";
export type {
  BoxSpace,
  ConnectOptions,
  Observation,
  ObservationSpace,
  PerceptionMode,
  StepResult,
} from "./client.js";
export {
  ACTION_DATAGRAM_SIZE,
  ACTION_MAGIC,
  Gear,
  SENSOR_DATAGRAM_SIZE,
  SENSOR_MAGIC,
  SENSOR_VALUE_COUNT,
  WireError,
  decodeAction,
  decodeCameraPayload,
  decodeSensor,
  encodeAction,
  encodeCameraFrame,
  encodeSensor,
} from "./wire.js";
export type { ActionMessage, CameraFrame, SensorMessage } from "./wire.js";
