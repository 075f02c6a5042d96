import traceback
from dataclasses import dataclass
from functools import wraps
from logging import ERROR
from pathlib import Path
from typing import Callable, Optional

from soap_bridge.exceptions import EXIT_CODES, SoapBridgeError
from soap_bridge.exec_env import ExecutionEnvironment
from soap_bridge.utils import log

UNEXPECTED_EXIT_CODE = 2


@dataclass(frozen=True)
class ExecutionResult:
    content: Optional[str]
    env: ExecutionEnvironment
    exit_code: int = 0


def with_env(func: Callable[..., ExecutionResult]) -> Callable[..., ExecutionResult]:
    @wraps(func)
    def wrapper(*args, verbose: bool = False, **kwargs) -> ExecutionResult:
        env = ExecutionEnvironment.create(Path.cwd(), verbose)
        with env.activate():
            return func(*args, env=env, **kwargs)

    return wrapper


def with_print(func: Callable[..., ExecutionResult]) -> Callable[..., ExecutionResult]:
    @wraps(func)
    def wrapper(*args, **kwargs) -> ExecutionResult:
        result = func(*args, **kwargs)
        for msg in result.env.runtime.messages:
            print(msg)
        if result.content:
            print(result.content)
        return result

    return wrapper


def with_error(func: Callable[..., ExecutionResult]) -> Callable[..., int]:
    @wraps(func)
    def wrapper(*args, **kwargs) -> int:
        try:
            return func(*args, **kwargs).exit_code
        except SoapBridgeError as e:
            log(ERROR, f"Error: {e.message}")
            return EXIT_CODES.get(e.error_type, UNEXPECTED_EXIT_CODE)
        except Exception as e:
            log(ERROR, f"An unexpected error occurred: {str(e)}")
            traceback.print_exc()
            return UNEXPECTED_EXIT_CODE

    return wrapper


def create_command(func: Callable[..., ExecutionResult]) -> Callable[..., int]:
    return with_error(with_print(with_env(func)))
