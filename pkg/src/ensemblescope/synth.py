"""Deterministic census-style benchmark data generator.

Produces an income-classification CSV with the familiar mix of skewed
numerics, correlated categoricals and "?" missing tokens, at the desk scale
the acceptance fixtures need. The label depends on smooth effects, category
interactions and localized pockets plus noise, so different model families
genuinely trade off against each other and error clusters show up in the
attribute-binned views.
"""

from __future__ import annotations

import csv

import numpy as np

EDUCATION_LEVELS = [
    ("Preschool", 1), ("1st-4th", 2), ("5th-6th", 3), ("7th-8th", 4),
    ("9th", 5), ("10th", 6), ("11th", 7), ("12th", 8),
    ("HS-grad", 9), ("Some-college", 10), ("Assoc-voc", 11), ("Assoc-acdm", 12),
    ("Bachelors", 13), ("Masters", 14), ("Prof-school", 15), ("Doctorate", 16),
]
EDUCATION_PROBS = np.array(
    [0.01, 0.01, 0.01, 0.02, 0.02, 0.03, 0.04, 0.02, 0.32, 0.22, 0.04, 0.03,
     0.16, 0.05, 0.01, 0.01]
)
WORKCLASS = ["Private", "Self-emp-not-inc", "Self-emp-inc", "Federal-gov",
             "Local-gov", "State-gov", "Without-pay"]
WORKCLASS_PROBS = np.array([0.735, 0.082, 0.036, 0.031, 0.067, 0.042, 0.007])
OCCUPATIONS = ["Tech-support", "Craft-repair", "Other-service", "Sales",
               "Exec-managerial", "Prof-specialty", "Handlers-cleaners",
               "Machine-op-inspct", "Adm-clerical", "Farming-fishing",
               "Transport-moving", "Priv-house-serv", "Protective-serv"]
MARITAL = ["Married-civ-spouse", "Divorced", "Never-married", "Separated",
           "Widowed", "Married-spouse-absent"]
RELATIONSHIP = ["Husband", "Not-in-family", "Own-child", "Unmarried", "Wife",
                "Other-relative"]
RACE = ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"]
RACE_PROBS = np.array([0.854, 0.096, 0.031, 0.01, 0.009])
COUNTRIES = ["United-States", "Mexico", "Philippines", "Germany", "Canada",
             "India", "England", "Cuba", "China", "South"]
COUNTRY_PROBS = np.array([0.913, 0.02, 0.007, 0.005, 0.004, 0.004, 0.003,
                          0.003, 0.003, 0.038])

HEADER = ["age", "workclass", "fnlwgt", "education", "education-num",
          "marital-status", "occupation", "relationship", "race", "sex",
          "capital-gain", "capital-loss", "hours-per-week", "native-country",
          "income"]

LABEL_NEG = "<=50K"
LABEL_POS = ">50K"


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def generate_rows(n_rows: int, seed: int) -> list[list[str]]:
    rng = np.random.RandomState(seed)
    age = np.clip(17 + rng.gamma(2.4, 9.0, n_rows), 17, 90).astype(int)
    edu_idx = rng.choice(len(EDUCATION_LEVELS), size=n_rows, p=EDUCATION_PROBS)
    edu_num = np.array([EDUCATION_LEVELS[i][1] for i in edu_idx])
    sex = rng.choice(["Male", "Female"], size=n_rows, p=[0.67, 0.33])
    married = (
        _sigmoid((age - 27) / 6.0) * 0.75 > rng.rand(n_rows)
    )
    marital = np.where(
        married, "Married-civ-spouse",
        rng.choice(MARITAL[1:], size=n_rows, p=[0.19, 0.58, 0.05, 0.08, 0.10]),
    )
    relationship = np.where(
        married & (sex == "Male"), "Husband",
        np.where(married & (sex == "Female"), "Wife",
                 rng.choice(["Not-in-family", "Own-child", "Unmarried", "Other-relative"],
                            size=n_rows, p=[0.47, 0.28, 0.19, 0.06])),
    )
    # occupation leans on education
    occ_white = ["Exec-managerial", "Prof-specialty", "Tech-support", "Sales",
                 "Adm-clerical"]
    occ_blue = ["Craft-repair", "Other-service", "Handlers-cleaners",
                "Machine-op-inspct", "Farming-fishing", "Transport-moving",
                "Priv-house-serv", "Protective-serv"]
    white_collar = _sigmoid((edu_num - 10) * 0.9) > rng.rand(n_rows)
    occupation = np.where(
        white_collar,
        rng.choice(occ_white, size=n_rows, p=[0.28, 0.30, 0.09, 0.22, 0.11]),
        rng.choice(occ_blue, size=n_rows, p=[0.25, 0.20, 0.09, 0.12, 0.06, 0.10, 0.01, 0.17]),
    )
    workclass = rng.choice(WORKCLASS, size=n_rows, p=WORKCLASS_PROBS)
    race = rng.choice(RACE, size=n_rows, p=RACE_PROBS)
    country = rng.choice(COUNTRIES, size=n_rows, p=COUNTRY_PROBS)
    fnlwgt = np.clip(rng.lognormal(12.0, 0.45, n_rows), 1.3e4, 1.2e6).astype(int)
    hours = np.clip(
        rng.normal(40 + 4 * white_collar + 3 * (sex == "Male"), 11, n_rows), 1, 99
    ).astype(int)
    has_gain = rng.rand(n_rows) < 0.085
    capital_gain = np.where(has_gain, np.clip(rng.lognormal(8.2, 1.1, n_rows), 100, 99999), 0)
    capital_gain = capital_gain.astype(int)
    has_loss = rng.rand(n_rows) < 0.047
    capital_loss = np.where(has_loss, np.clip(rng.normal(1870, 380, n_rows), 200, 4400), 0)
    capital_loss = capital_loss.astype(int)

    # latent income score: smooth effects + interactions + local pockets
    z = (
        -3.75
        + 0.32 * (edu_num - 9)
        + 0.042 * (hours - 40)
        + 1.65 * married
        + 0.55 * (sex == "Male")
        + 1.9 * (capital_gain > 5000)
        + 0.8 * ((capital_gain > 0) & (capital_gain <= 5000))
        + 0.6 * (capital_loss > 1500)
        + 0.9 * np.isin(occupation, ["Exec-managerial", "Prof-specialty"])
        + 0.35 * np.isin(occupation, ["Sales", "Tech-support", "Protective-serv"])
        - 1.4 * np.exp(-((age - 22.0) ** 2) / 60.0)  # young earners rarely cross the line
        + 0.9 * np.exp(-((age - 48.0) ** 2) / 180.0)  # mid-career hump
        + 0.75 * (married & white_collar)
        - 0.5 * ((hours < 30) & ~married)
    )
    # a localized non-additive pocket that trees capture but linear models miss
    pocket = (age >= 33) & (age <= 43) & ~married & (edu_num >= 13) & (hours >= 45)
    z = z + 2.6 * pocket
    noise = rng.logistic(0, 1.0, n_rows)
    income = np.where(z + 0.9 * noise > 0, LABEL_POS, LABEL_NEG)

    # "?" pattern: workclass+occupation go missing together, country alone
    wc_missing = rng.rand(n_rows) < 0.05
    country_missing = rng.rand(n_rows) < 0.015
    rows = []
    for i in range(n_rows):
        rows.append([
            str(age[i]),
            "?" if wc_missing[i] else workclass[i],
            str(fnlwgt[i]),
            EDUCATION_LEVELS[edu_idx[i]][0],
            str(edu_num[i]),
            marital[i],
            "?" if wc_missing[i] else occupation[i],
            relationship[i],
            race[i],
            sex[i],
            str(capital_gain[i]),
            str(capital_loss[i]),
            str(hours[i]),
            "?" if country_missing[i] else country[i],
            income[i],
        ])
    return rows


def write_csv(path, n_rows: int = 10000, seed: int = 7) -> dict:
    """Write the generated CSV; returns row/label counts for logging."""
    rows = generate_rows(n_rows, seed)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        writer.writerows(rows)
    n_pos = sum(1 for r in rows if r[-1] == LABEL_POS)
    n_missing = sum(1 for r in rows if "?" in r)
    return {"rows": n_rows, "positive": n_pos, "with_missing": n_missing}
