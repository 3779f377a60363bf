/** Base class for all bridge failures so callers can catch one type. */
export class BridgeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** A file is not in the strict tensor dialect this bridge exchanges. */
export class NpyFormatError extends BridgeError {}

/** A CSV file does not match the documented header/row contract. */
export class CsvFormatError extends BridgeError {}

/** The requested layer cannot serve as a model split point. */
export class SplitError extends BridgeError {}
