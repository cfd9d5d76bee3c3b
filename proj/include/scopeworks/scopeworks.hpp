// Copyright 2026 The Scopeworks Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SCOPEWORKS_SCOPEWORKS_HPP_
#define SCOPEWORKS_SCOPEWORKS_HPP_

#include "scopeworks/common.hpp"
#include "scopeworks/corpus.hpp"
#include "scopeworks/encoding.hpp"
#include "scopeworks/eval.hpp"
#include "scopeworks/experiment.hpp"
#include "scopeworks/model.hpp"
#include "scopeworks/synthetic.hpp"
#include "scopeworks/tokenize.hpp"
#include "scopeworks/xml.hpp"

#endif  // SCOPEWORKS_SCOPEWORKS_HPP_
