"""Exception types raised across the package."""


class AdaclustError(Exception):
    pass


class DimensionError(AdaclustError, ValueError):
    pass


class LabelError(AdaclustError, ValueError):
    pass


class ParameterError(AdaclustError, ValueError):
    pass


class DegenerateInputError(AdaclustError, ValueError):
    pass


class EmptyInputError(AdaclustError, ValueError):
    pass


class GeneratorError(AdaclustError, RuntimeError):
    pass


class ParseError(AdaclustError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class TrainingDivergenceError(AdaclustError, FloatingPointError):
    def __init__(self, batch_index, detail=""):
        self.batch_index = batch_index
        super().__init__(f"non-finite loss at batch {batch_index}{': ' + detail if detail else ''}")
