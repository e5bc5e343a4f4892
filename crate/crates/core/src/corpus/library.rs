//! The built-in script library for the synthetic corpus generator.
//!
//! Every issue has several subtypes. A subtype fixes the customer's opening
//! complaint and the sequence of investigative intents the agent works
//! through. Subtypes of one issue (and of different issues) share intents, so
//! the question that follows a shared intent is only predictable when the
//! subtype is known, and the subtype is only stated in the opener and in
//! informative customer replies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntentDef {
    pub name: String,
    /// Question forms; placeholders allowed.
    pub variants: Vec<String>,
    /// Non-question forms with the same intent.
    #[serde(default)]
    pub paraphrases: Vec<String>,
    /// Informative customer answers.
    pub answers: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtypeDef {
    pub name: String,
    pub openers: Vec<String>,
    /// Short restatements of the problem used in informative replies.
    pub reminders: Vec<String>,
    /// Intent ids in the order the agent asks them.
    pub path: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IssueDef {
    pub name: String,
    pub subtypes: Vec<SubtypeDef>,
}

/// Courtesy and status-checking questions: a canonical form (used as a
/// filter seed) and close paraphrases planted in conversations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CourtesyDef {
    pub canonical: String,
    pub paraphrases: Vec<String>,
}

impl CourtesyDef {
    pub fn forms(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.canonical).chain(&self.paraphrases)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptLibrary {
    pub intents: Vec<IntentDef>,
    pub issues: Vec<IssueDef>,
    pub greeting: CourtesyDef,
    pub status_check: CourtesyDef,
    pub closing: CourtesyDef,
    pub agent_intros: Vec<String>,
    pub agent_fillers: Vec<String>,
    pub agent_wrapups: Vec<String>,
    pub status_replies: Vec<String>,
    pub closing_replies: Vec<String>,
    /// Context-free customer replies.
    pub generic_replies: Vec<String>,
    pub customer_nudges: Vec<String>,
}

impl ScriptLibrary {
    pub fn validate(&self) -> Result<()> {
        for issue in &self.issues {
            if issue.subtypes.is_empty() {
                return Err(Error::Validation(format!("issue {} has no subtypes", issue.name)));
            }
            for st in &issue.subtypes {
                if st.path.is_empty() || st.openers.is_empty() || st.reminders.is_empty() {
                    return Err(Error::Validation(format!(
                        "subtype {}/{} needs a path, openers and reminders",
                        issue.name, st.name
                    )));
                }
                if let Some(bad) = st.path.iter().find(|&&i| i >= self.intents.len()) {
                    return Err(Error::Validation(format!(
                        "subtype {}/{} references unknown intent {bad}",
                        issue.name, st.name
                    )));
                }
            }
        }
        for (id, intent) in self.intents.iter().enumerate() {
            if intent.variants.is_empty() || intent.answers.is_empty() {
                return Err(Error::Validation(format!("intent {id} ({}) is incomplete", intent.name)));
            }
        }
        let pools = [
            &self.agent_intros,
            &self.agent_fillers,
            &self.agent_wrapups,
            &self.status_replies,
            &self.closing_replies,
            &self.generic_replies,
            &self.customer_nudges,
        ];
        if pools.iter().any(|p| p.is_empty()) {
            return Err(Error::Validation("script library has an empty phrase pool".into()));
        }
        Ok(())
    }

    /// Canonical courtesy/status questions, the default seeds for filtering.
    pub fn seed_phrases(&self) -> Vec<String> {
        [&self.greeting, &self.status_check, &self.closing]
            .iter()
            .map(|c| c.canonical.clone())
            .collect()
    }

    /// Intents that appear in the scripts of the first `n_issues` issues.
    pub fn used_intents(&self, n_issues: usize) -> Vec<usize> {
        let mut used: Vec<usize> = self
            .issues
            .iter()
            .take(n_issues)
            .flat_map(|i| i.subtypes.iter().flat_map(|s| s.path.iter().copied()))
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn intent(name: &str, variants: &[&str], paraphrases: &[&str], answers: &[&str]) -> IntentDef {
    IntentDef {
        name: name.into(),
        variants: strings(variants),
        paraphrases: strings(paraphrases),
        answers: strings(answers),
    }
}

fn subtype(name: &str, openers: &[&str], reminders: &[&str], path: &[usize]) -> SubtypeDef {
    SubtypeDef {
        name: name.into(),
        openers: strings(openers),
        reminders: strings(reminders),
        path: path.to_vec(),
    }
}

fn courtesy(canonical: &str, paraphrases: &[&str]) -> CourtesyDef {
    CourtesyDef {
        canonical: canonical.into(),
        paraphrases: strings(paraphrases),
    }
}

impl Default for ScriptLibrary {
    fn default() -> Self {
        let intents = vec![
            intent(
                "reservation_code",
                &[
                    "Could you provide the reservation code?",
                    "Can you share the reservation code with me?",
                    "Can you let me know the reservation code?",
                    "What is the reservation code for this booking?",
                ],
                &["Please let me know the reservation code if you have."],
                &["Sure, it is {reservation code}.", "The code is {reservation code}.", "Here it is: {reservation code}."],
            ),
            intent(
                "host_reservation",
                &[
                    "Is this for your reservation with {host name}?",
                    "Is this about your reservation with {host name}?",
                    "Are you asking about the reservation with {host name}?",
                ],
                &[],
                &["Yes, the one with {host name}.", "Yes, it is the reservation with {host name}."],
            ),
            intent(
                "app_or_website",
                &[
                    "Are you on the app or website?",
                    "Are you using the app or the website?",
                    "Is this happening on the app or on the website?",
                ],
                &[],
                &["I am on the app.", "I am using the website.", "On the app."],
            ),
            intent(
                "payment_method_added",
                &[
                    "Have you added the payment method?",
                    "Did you add the payment method to your account?",
                    "Have you already added the payment method?",
                ],
                &[],
                &["I think I added it already.", "Not yet, I have not added it."],
            ),
            intent(
                "which_payment_method",
                &[
                    "Which payment method would you like to use?",
                    "What payment method do you want to use?",
                    "Which payment method would you prefer?",
                ],
                &["Let me know which payment method you would like to use."],
                &["I would like to use my other card.", "I want to pay with ideal."],
            ),
            intent(
                "card_ending",
                &[
                    "Did you want to charge your card ending in {card last4}?",
                    "Should we charge the card ending in {card last4}?",
                    "Is the card ending in {card last4} the one you want to charge?",
                ],
                &[],
                &["Yes, that card is fine.", "No, please use a different card."],
            ),
            intent(
                "browser_cache",
                &[
                    "Have you tried clearing your browser cache?",
                    "Could you try clearing the browser cache?",
                    "Did you clear your browser cache already?",
                ],
                &[],
                &["I cleared the cache but nothing changed.", "I just tried that."],
            ),
            intent(
                "error_message",
                &[
                    "What error message do you see?",
                    "Can you tell me the exact error message?",
                    "Which error message do you see on the screen?",
                ],
                &[],
                &["It just says something went wrong.", "The error says the request failed."],
            ),
            intent(
                "cancel_reason",
                &[
                    "May I ask why you want to cancel?",
                    "What is the reason you want to cancel?",
                    "Could you tell me why you would like to cancel?",
                ],
                &[],
                &["My plans changed.", "I can no longer travel on those dates."],
            ),
            intent(
                "host_contacted",
                &[
                    "Have you contacted the host about this?",
                    "Did you reach out to the host about this?",
                    "Have you messaged the host about this?",
                ],
                &[],
                &["I messaged the host but got no reply.", "Not yet."],
            ),
            intent(
                "cancel_dates",
                &[
                    "Which dates would you like to cancel?",
                    "What dates do you want to cancel?",
                    "Which dates do you need to cancel?",
                ],
                &[],
                &["All of the nights.", "Just the last two nights."],
            ),
            intent(
                "emergency",
                &[
                    "Is the cancellation due to an emergency?",
                    "Are you cancelling because of an emergency?",
                    "Did an emergency cause the cancellation?",
                ],
                &[],
                &["Yes, there was a family emergency.", "No, nothing like that."],
            ),
            intent(
                "account_email",
                &[
                    "What email address is on the account?",
                    "Which email address is on your account?",
                    "Can you confirm the email address on your account?",
                ],
                &["Please confirm the email address on your account."],
                &["It is {email}.", "I used {email}."],
            ),
            intent(
                "duplicate_account",
                &[
                    "Do you perhaps have another account with us?",
                    "Do you perhaps have a duplicated account with us?",
                    "Could you perhaps have a second account with us?",
                ],
                &[],
                &["I might have an old account.", "No, just this one."],
            ),
            intent(
                "verification_code",
                &[
                    "Did you receive the verification code?",
                    "Have you received the verification code?",
                    "Did the verification code arrive?",
                ],
                &[],
                &["No code arrived.", "I got it but it does not work."],
            ),
            intent(
                "phone_number",
                &[
                    "Is {phone number} still your phone number?",
                    "Can you confirm your phone number is {phone number}?",
                    "Is your phone number still {phone number}?",
                ],
                &[],
                &["Yes, that is my number.", "No, I changed my number."],
            ),
            intent(
                "password_reset",
                &[
                    "Have you tried resetting your password?",
                    "Did you try resetting the password?",
                    "Could you try resetting your password?",
                ],
                &[],
                &["I tried, the reset email never came.", "Yes, it did not help."],
            ),
            intent(
                "refund_amount",
                &[
                    "What refund amount were you expecting?",
                    "How much of a refund were you expecting?",
                    "Which refund amount were you expecting?",
                ],
                &[],
                &["I expected {amount}.", "I was expecting {amount} back."],
            ),
            intent(
                "original_payment",
                &[
                    "Was the booking paid with a card or with paypal?",
                    "Did you pay for the booking with a card or paypal?",
                    "Was the booking paid by card or paypal?",
                ],
                &[],
                &["I paid with my card.", "With paypal."],
            ),
            intent(
                "bank_statement",
                &[
                    "Could you check your bank statement?",
                    "Can you check the bank statement for the charge?",
                    "Have you checked your bank statement?",
                ],
                &[],
                &["I see the charge on my statement.", "Nothing shows on my statement yet."],
            ),
            intent(
                "listing_link",
                &[
                    "Could you send me the link to your listing?",
                    "Can you share the link to your listing?",
                    "What is the link to your listing?",
                ],
                &[],
                &["Here it is: {url}", "It is {url}"],
            ),
            intent(
                "calendar_settings",
                &[
                    "Have you checked your calendar settings?",
                    "Did you update your calendar settings?",
                    "Are your calendar settings up to date?",
                ],
                &[],
                &["The calendar looks right to me.", "I have not changed the calendar."],
            ),
            intent(
                "image_upload",
                &[
                    "Are the images failing to upload?",
                    "Did the image upload fail?",
                    "Are you unable to upload the images?",
                ],
                &[],
                &["Yes, the upload gets stuck.", "They upload but do not show."],
            ),
            intent(
                "arrival_time",
                &[
                    "What time did you arrive at the property?",
                    "When did you arrive at the property?",
                    "At what time did you get to the property?",
                ],
                &[],
                &["We arrived at {timestamp}.", "Around {timestamp}."],
            ),
            intent(
                "lockbox_code",
                &[
                    "Did the host give you the lockbox code?",
                    "Have you received the lockbox code from the host?",
                    "Do you have the lockbox code?",
                ],
                &[],
                &["No, the host never sent it.", "I have it but it does not open."],
            ),
            intent(
                "photos_of_problem",
                &[
                    "Could you send photos of the problem?",
                    "Can you send me photos of the problem?",
                    "Would you be able to send photos of the problem?",
                ],
                &[],
                &["Sure, I will send them now.", "I already took some."],
            ),
            intent(
                "another_place",
                &[
                    "Would you like help finding another place to stay?",
                    "Do you want help finding another place to stay?",
                    "Should we help you find another place to stay?",
                ],
                &[],
                &["Yes please, we need somewhere tonight.", "Maybe, let me think."],
            ),
            intent(
                "payout_method",
                &[
                    "Which payout method have you set up?",
                    "What payout method is on your account?",
                    "Which payout method are you using?",
                ],
                &[],
                &["I use bank transfer.", "Direct deposit."],
            ),
            intent(
                "tax_information",
                &[
                    "Have you submitted your tax information?",
                    "Did you add your tax information?",
                    "Have you completed the tax information form?",
                ],
                &[],
                &["I think so.", "No, I did not know about that."],
            ),
        ];

        let issues = vec![
            IssueDef {
                name: "payments".into(),
                subtypes: vec![
                    subtype(
                        "payment_link",
                        &[
                            "The payment link I received by email does not guide me to a payment page. I like to complete this payment. Please help.",
                            "I got an email with a payment link but it does not open the payment page. I want to finish paying.",
                        ],
                        &["The payment link still does not work.", "I still cannot get to the payment page."],
                        &[1, 2, 6, 7],
                    ),
                    subtype(
                        "change_method",
                        &[
                            "I want to change the payment method on my booking.",
                            "How do I switch my payment method for the trip?",
                        ],
                        &["I just want to switch to another payment method.", "I need to change how I pay."],
                        &[1, 3, 4],
                    ),
                    subtype(
                        "double_charge",
                        &[
                            "I was charged twice for my booking. I see two charges of {amount}.",
                            "There are two charges of {amount} for the same trip.",
                        ],
                        &["I still see two charges.", "I was charged twice."],
                        &[0, 19, 5],
                    ),
                    subtype(
                        "card_declined",
                        &[
                            "My card keeps getting declined when I try to pay.",
                            "The payment fails every time, my card is declined.",
                        ],
                        &["My card is still declined.", "It keeps saying declined."],
                        &[0, 7, 4, 5],
                    ),
                ],
            },
            IssueDef {
                name: "cancellation".into(),
                subtypes: vec![
                    subtype(
                        "guest_cancel",
                        &["I need to cancel my reservation.", "Please help me cancel my upcoming trip."],
                        &["I just want to cancel.", "I want to cancel the whole trip."],
                        &[0, 8, 10],
                    ),
                    subtype(
                        "emergency_cancel",
                        &[
                            "I have a family emergency and cannot travel.",
                            "Something urgent came up at home and we cannot make the trip.",
                        ],
                        &["It is an emergency.", "Something urgent happened at home."],
                        &[0, 11, 10],
                    ),
                    subtype(
                        "host_cancelled",
                        &["My host cancelled my reservation at the last minute.", "The host just cancelled on us."],
                        &["The host cancelled on me.", "We have nowhere to stay now."],
                        &[1, 9, 26],
                    ),
                    subtype(
                        "shorten_stay",
                        &[
                            "I want to shorten my stay by a couple of nights.",
                            "Can I cancel only some nights of my booking?",
                        ],
                        &["I only want to cancel some nights.", "I want a shorter stay."],
                        &[0, 10, 17],
                    ),
                ],
            },
            IssueDef {
                name: "account_access".into(),
                subtypes: vec![
                    subtype(
                        "locked_out",
                        &["I cannot log in to my account.", "I am locked out of my account."],
                        &["I still cannot log in.", "I am still locked out."],
                        &[12, 16, 14],
                    ),
                    subtype(
                        "no_verification",
                        &[
                            "I never receive the verification text when I log in.",
                            "The login text message never comes.",
                        ],
                        &["The text still does not come.", "Nothing arrives on my phone."],
                        &[12, 15, 14],
                    ),
                    subtype(
                        "wrong_account",
                        &[
                            "I think I have two accounts and my booking is in the wrong one.",
                            "My reservation shows up under a different account.",
                        ],
                        &["My booking is in the other account.", "It is under the wrong account."],
                        &[12, 13, 0],
                    ),
                    subtype(
                        "update_contact",
                        &["I want to change the contact details on my profile.", "How can I update my profile details?"],
                        &["I just need new contact details.", "My profile details are old."],
                        &[12, 15],
                    ),
                ],
            },
            IssueDef {
                name: "refunds".into(),
                subtypes: vec![
                    subtype(
                        "missing_refund",
                        &["I have not received my refund yet.", "Where is my refund? It has been two weeks."],
                        &["I am still waiting for my refund.", "Nothing has come back yet."],
                        &[0, 17, 18, 19],
                    ),
                    subtype(
                        "partial_refund",
                        &["My refund was less than I expected.", "The refund I got is too small."],
                        &["The refund is too small.", "I got back less than I should."],
                        &[0, 17, 19],
                    ),
                    subtype(
                        "service_fee",
                        &["Why was the service fee not refunded?", "I did not get the service fee back."],
                        &["The service fee is still missing.", "I want the service fee back."],
                        &[0, 18, 17],
                    ),
                    subtype(
                        "closed_card",
                        &["My refund went to a card that is closed.", "The card I paid with is closed now."],
                        &["That card is closed.", "The old card does not exist anymore."],
                        &[0, 18, 5],
                    ),
                ],
            },
            IssueDef {
                name: "hosting".into(),
                subtypes: vec![
                    subtype(
                        "listing_images",
                        &["I cannot add pictures to my listing.", "My listing pictures will not appear."],
                        &["The pictures still will not appear.", "Still no pictures on the listing."],
                        &[20, 2, 22],
                    ),
                    subtype(
                        "calendar_blocked",
                        &[
                            "My calendar shows dates as blocked that should be open.",
                            "Guests cannot book dates that I opened.",
                        ],
                        &["The dates are still blocked.", "Nobody can book those dates."],
                        &[20, 21, 2],
                    ),
                    subtype(
                        "payout_missing",
                        &["I have not received my payout.", "My payout is late this month."],
                        &["My payout still has not arrived.", "The payout is still missing."],
                        &[0, 27, 28],
                    ),
                    subtype(
                        "guest_damage",
                        &["A guest damaged my place.", "My guest broke some furniture."],
                        &["The damage is serious.", "A lot of things are broken."],
                        &[0, 25],
                    ),
                ],
            },
            IssueDef {
                name: "check_in".into(),
                subtypes: vec![
                    subtype(
                        "no_access",
                        &["I cannot get into the place.", "We are at the door and cannot get in."],
                        &["We still cannot get in.", "We are still outside."],
                        &[1, 24, 9, 26],
                    ),
                    subtype(
                        "not_as_described",
                        &["The place does not look like the listing.", "The apartment is very different from the description."],
                        &["The place is not what was described.", "It is nothing like the description."],
                        &[1, 25, 23, 26],
                    ),
                    subtype(
                        "late_arrival",
                        &["We will arrive very late tonight.", "Our flight is delayed and we will check in late."],
                        &["We will be late.", "Our arrival is delayed."],
                        &[1, 9, 24],
                    ),
                    subtype(
                        "dirty",
                        &["The place is dirty.", "The apartment was not cleaned before we came."],
                        &["It is really dirty.", "Nothing was cleaned."],
                        &[1, 25, 9, 26],
                    ),
                ],
            },
        ];

        ScriptLibrary {
            intents,
            issues,
            greeting: courtesy("How are you doing today?", &["How are you today?", "How are you doing?"]),
            status_check: courtesy(
                "Are you still there with me?",
                &["Are you still with me?", "Are you still there?"],
            ),
            closing: courtesy(
                "Is there anything else I can help you with?",
                &[
                    "Is there anything else I can help with?",
                    "Is there anything else I can help you with today?",
                ],
            ),
            agent_intros: strings(&[
                "Hi {customer name}, my name is {agent name}.",
                "Hello {customer name}, this is {agent name}.",
                "Hi {customer name}, thanks for reaching out.",
            ]),
            agent_fillers: strings(&[
                "Let me look into this for you.",
                "Thanks for waiting.",
                "I understand.",
                "Give me a moment while I check.",
                "Thank you for the details.",
            ]),
            agent_wrapups: strings(&[
                "I have taken care of this for you.",
                "Everything should be sorted now.",
                "I have updated your case.",
            ]),
            status_replies: strings(&["Yes, I am here.", "Still here.", "Yes."]),
            closing_replies: strings(&["No, that is all. Thanks!", "No thank you.", "That is all, thanks."]),
            generic_replies: strings(&["Yes.", "OK.", "Sure.", "Okay.", "Yes, one second.", "Done."]),
            customer_nudges: strings(&["Hello?", "Please help.", "Thanks.", "Any update?"]),
        }
    }
}
