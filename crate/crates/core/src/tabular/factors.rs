/// Survey factor descriptions, indexed by factor number minus one.
pub const HEALTH_FACTOR_DESCRIPTIONS: [&str; 93] = [
    "Population (female) age 6 years and above who ever attended school (%)",
    "Population below age 15 years (%)",
    "Sex ratio of the total population (females per 1,000 males)",
    "Sex ratio at birth for children born in the last five years (females per 1,000 males)",
    "Children under age 5 years whose birth was registered (%)",
    "Households with electricity (%)",
    "Households with an improved drinking-water source ¹ (%)",
    "Households using improved sanitation facility ² (%)",
    "Households using clean fuel for cooking ³ (%)",
    "Households using iodized salt (%)",
    "Households with any usual member covered by a health scheme or health insurance (%)",
    "Women who are literate (%)",
    "Men who are literate (%)",
    "Women with 10 or more years of schooling (%)",
    "Women age 20-24 years married before age 18 years (%)",
    "Men age 25-29 years married before age 21 years (%)",
    "Women age 15-19 years who were already mothers or pregnant at the time of the survey (%)",
    "Any method4 (%)",
    "Any modern method4 (%)",
    "Female sterilization (%)",
    "Male sterilization (%)",
    "IUD/PPIUD (%)",
    "Pill (%)",
    "Condom (%)",
    "Total unmet need (%)",
    "Unmet need for spacing (%)",
    "Health worker ever talked to female non-users about family planning (%)",
    "Current users ever told about side effects of current method6 (%)",
    "Mothers who had antenatal check-up in the first trimester (%)",
    "Mothers who had at least 4 antenatal care visits (%)",
    "Mothers whose last birth was protected against neonatal tetanus7 (%)",
    "Mothers who consumed iron folic acid for 100 days or more when they were pregnant (%)",
    "Mothers who had full antenatal care ⁸ (%)",
    "Registered pregnancies for which the mother received Mother and Child Protection (MCP) card (%)",
    "Mothers who received postnatal care from a doctor/nurse/LHV/ANM/midwife/other health personnel within 2 days of delivery (%)",
    "Mothers who received financial assistance under Janani Suraksha Yojana (JSY) for births delivered in an institution (%)",
    "Average out of pocket expenditure per delivery in public health facility (Rs.)",
    "Children born at home who were taken to a health facility for check-up within 24 hours of birth (%)",
    "Children who received a health check after birth from a doctor/nurse/LHV/ANM/ midwife/other health personnel within 2 days of birth (%)",
    "Institutional births (%)",
    "Institutional births in public facility (%)",
    "Home delivery conducted by skilled health personnel (out of total deliveries) (%)",
    "Births assisted by a doctor/nurse/LHV/ANM/other health personnel (%)",
    "Births delivered by caesarean section (%)",
    "Births in a private health facility delivered by caesarean section (%)",
    "Births in a public health facility delivered by caesarean section (%)",
    "Children age 12-23 months fully immunized (BCG, measles, and 3 doses each of polio and DPT) (%)",
    "Children age 12-23 months who have received BCG (%)",
    "Children age 12-23 months who have received 3 doses of polio vaccine (%)",
    "Children age 12-23 months who have received 3 doses of DPT vaccine (%)",
    "Children age 12-23 months who have received measles vaccine (%)",
    "Children age 12-23 months who have received 3 doses of Hepatitis B vaccine (%)",
    "Children age 9-59 months who received a vitamin A dose in last 6 months (%)",
    "Children age 12-23 months who received most of the vaccinations in public health facility (%)",
    "Children age 12-23 months who received most of the vaccinations in private health facility (%)",
    "Prevalence of diarrhoea (reported) in the last 2 weeks preceding the survey (%)",
    "Children with diarrhoea in the last 2 weeks who received oral rehydration salts (ORS) (%)",
    "Children with diarrhoea in the last 2 weeks who received zinc (%)",
    "Children with diarrhoea in the last 2 weeks taken to a health facility (%)",
    "Prevalence of symptoms of acute respiratory infection (ARI) in the last 2 weeks preceding the survey (%)",
    "Children with fever or symptoms of ARI in the last 2 weeks preceding the survey taken to a health facility (%)",
    "Children under age 3 years breastfed within one hour of birth ⁹ (%)",
    "Children under age 6 months exclusively breastfed ¹⁰ (%)",
    "Children age 6-8 months receiving solid or semi-solid food and breastmilk ¹⁰ (%)",
    "Breastfeeding children age 6-23 months receiving an adequate diet ^{10,11} (%)",
    "Non-breastfeeding children age 6-23 months receiving an adequate diet ^{10,11} (%)",
    "Total children age 6-23 months receiving an adequate diet ^{10,11} (%)",
    "Children under 5 years who are stunted (height-for-age) ¹² (%)",
    "Children under 5 years who are wasted (weight-for-height) ¹² (%)",
    "Children under 5 years who are severely wasted (weight-for-height) ¹³ (%)",
    "Children under 5 years who are underweight (weight-for-age) ¹² (%)",
    "Women whose Body Mass Index (BMI) is below normal (BMI < 18.5 kg/m ²)14 (%)",
    "Men whose Body Mass Index (BMI) is below normal (BMI < 18.5 kg/m ²) (%)",
    "Women who are overweight or obese (BMI \\geq 25.0 kg/m ²)14 (%)",
    "Men who are overweight or obese (BMI \\geq 25.0 kg/m ²) (%)",
    "Children age 6-59 months who are anaemic (<11.0 g/dl) (%)",
    "Non-pregnant women age 15-49 years who are anaemic (<12.0 g/dl) (%)",
    "Pregnant women age 15-49 years who are anaemic (<11.0 g/dl) (%)",
    "All women age 15-49 years who are anaemic (%)",
    "Men age 15-49 years who are anaemic (<13.0 g/dl) (%)",
    "Blood sugar level - high (>140 mg/dl) (%) women",
    "Blood sugar level - very high (>160 mg/dl) (%) women",
    "Blood sugar level - high (>140 mg/dl) (%) men",
    "Blood sugar level - very high (>160 mg/dl) (%) men",
    "Slightly above normal (Systolic 140-159 mm of Hg and/or Diastolic 90-99 mm of Hg) (%) women",
    "Moderately high (Systolic 160-179 mm of Hg and/or Diastolic 100-109 mm of Hg) (%) women",
    "Very high (Systolic \\geq 180 mm of Hg and/or Diastolic \\geq 110 mm of Hg) (%) women",
    "Slightly above normal (Systolic 140-159 mm of Hg and/or Diastolic 90-99 mm of Hg) (%) men",
    "Moderately high (Systolic 160-179 mm of Hg and/or Diastolic 100-109 mm of Hg) (%) men",
    "Very high (Systolic ≥ 180 mm of Hg and/or Diastolic ≥ 110 mm of Hg) (%) men",
    "Cervix (%)",
    "Breast (%)",
    "Oral cavity (%)",
];
