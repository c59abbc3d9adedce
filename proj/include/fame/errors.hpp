/*
 * Copyright 2026 The fairfuse Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FAME_ERRORS_HPP_
#define FAME_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace fame {

// Root of every error the library throws. Callers that only need a message
// catch this; the CLI maps it to a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or generator configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input (files, empty datasets, bad rows).
class InputError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates the cohort schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace fame

#endif  // FAME_ERRORS_HPP_
